import numpy as np
import pytest

from modekit.dmd import Episode


def random_theta(rng, r, lo=0.7, hi=1.05):
    z = rng.standard_normal(r) + 1j * rng.standard_normal(r)
    return z / np.abs(z) * rng.uniform(lo, hi, r)


def random_dataset(rng, n=4, p=6, tau=12, labels=None):
    if labels is None:
        labels = [1 + (i % 2) for i in range(n)]
    return [Episode(rng.standard_normal((p, tau)), y, f"e{i}") for i, y in enumerate(labels)]


def wirtinger_fd(func, theta, h=1e-6):
    """Central-difference estimate of d func / d theta_j = (f_x - i f_y) / 2 for every entry."""
    theta = np.asarray(theta, dtype=complex)
    out = np.zeros(theta.shape, dtype=complex)
    for idx in np.ndindex(theta.shape):
        e = np.zeros(theta.shape, dtype=complex)
        e[idx] = h
        dx = (func(theta + e) - func(theta - e)) / (2 * h)
        dy = (func(theta + 1j * e) - func(theta - 1j * e)) / (2 * h)
        out[idx] = 0.5 * (dx - 1j * dy)
    return out


def rel_err(a, b):
    a, b = np.asarray(a), np.asarray(b)
    return float(np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-300))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
