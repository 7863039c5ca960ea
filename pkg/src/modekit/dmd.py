"""Exact and optimized (variable-projection) dynamic mode decomposition.

Derivatives with respect to the eigenvalues ``theta`` are holomorphic
Wirtinger derivatives ``df/dtheta`` (``conj(theta)`` held fixed). The steepest
ascent direction of a real objective is ``2 * conj(df/dtheta)``; that mapping
is applied once, in :mod:`modekit.optimizer`.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from modekit.numerics import (
    DEFAULT_RTOL,
    RankDeficiencyError,
    contract_vandermonde_deriv,
    numerical_rank,
    pinv,
    svd,
    vandermonde,
)

log = logging.getLogger(__name__)

DISTINCT_DELTA = 1e-8


@dataclass(frozen=True)
class Episode:
    """One labeled time series; columns of ``snapshots`` are time-ordered."""

    snapshots: np.ndarray
    label: int
    id: str = ""

    def __post_init__(self):
        x = np.asarray(self.snapshots)
        if x.ndim != 2:
            raise ValueError(f"episode {self.id!r}: snapshots must be 2-d, got {x.shape}")
        if x.shape[0] < 1 or x.shape[1] < 2:
            raise ValueError(f"episode {self.id!r}: need p >= 1 and tau >= 2, got {x.shape}")
        if not np.all(np.isfinite(x)):
            raise ValueError(f"episode {self.id!r}: non-finite snapshot entries")
        object.__setattr__(self, "snapshots", x)

    @property
    def p(self) -> int:
        return self.snapshots.shape[0]

    @property
    def tau(self) -> int:
        return self.snapshots.shape[1]


@dataclass
class DmdFit:
    theta: np.ndarray
    modes: np.ndarray
    amplitudes: np.ndarray = field(default=None)


def _data(ep) -> np.ndarray:
    return ep.snapshots if isinstance(ep, Episode) else np.asarray(ep)


def as_theta(theta) -> np.ndarray:
    theta = np.atleast_1d(np.asarray(theta, dtype=np.complex128))
    if theta.ndim != 1 or theta.size == 0:
        raise ValueError("theta must be a nonempty 1-d set of complex values")
    if not np.all(np.isfinite(theta)):
        raise ValueError("theta has non-finite entries")
    return theta


def separate_thetas(theta, delta: float = DISTINCT_DELTA) -> tuple[np.ndarray, int]:
    """Push apart entries closer than ``delta``; returns (theta, number of nudges).

    Each colliding pair is moved symmetrically along its difference direction
    (or along the real axis when the two are bitwise equal) until the gap is
    ``delta``.
    """
    theta = as_theta(theta).copy()
    nudges = 0
    r = theta.size
    for a in range(r):
        for b in range(a + 1, r):
            diff = theta[b] - theta[a]
            gap = abs(diff)
            if gap < delta:
                direction = diff / gap if gap > 0 else 1.0
                shift = 0.5 * (delta - gap) * direction
                theta[a] -= shift
                theta[b] += shift
                nudges += 1
    if nudges:
        log.debug("separated %d near-coincident eigenvalue pair(s)", nudges)
    return theta, nudges


def exact_dmd(ep, r: int, rtol: float = DEFAULT_RTOL) -> DmdFit:
    """Eigendecomposition-based DMD with rank-``r`` SVD truncation.

    Eigenvalues come from the projected operator ``U^H X+ V S^-1``; modes are
    the exact DMD modes ``X+ V S^-1 y`` and amplitudes the least-squares fit of
    the first snapshot onto the modes.
    """
    x = _data(ep)
    p, tau = x.shape
    if tau < 2:
        raise ValueError("exact DMD needs at least two snapshots")
    if not 1 <= r <= min(p, tau - 1):
        raise ValueError(f"r={r} must lie in [1, min(p, tau-1)] = [1, {min(p, tau - 1)}]")
    x_minus, x_plus = x[:, :-1], x[:, 1:]
    u, s, vh = svd(x_minus)
    rank = numerical_rank(s, rtol)
    if rank < r:
        raise RankDeficiencyError(
            f"r={r} exceeds numerical rank {rank} of the lagged snapshot matrix", rank
        )
    u, s, v = u[:, :r], s[:r], vh[:r].conj().T
    lifted = x_plus @ v / s
    atilde = u.conj().T @ lifted
    theta, evecs = np.linalg.eig(atilde)
    order = np.lexsort((theta.imag, -np.abs(theta)))
    theta, evecs = theta[order], evecs[:, order]
    modes = lifted @ evecs
    # exact modes vanish for zero eigenvalues; use projected modes there
    weak = np.abs(theta) <= rtol * np.abs(theta).max(initial=0.0)
    modes[:, weak] = (u @ evecs)[:, weak]
    amplitudes = np.linalg.lstsq(modes, x[:, 0].astype(np.complex128), rcond=None)[0]
    theta, _ = separate_thetas(theta)
    return DmdFit(theta=theta, modes=modes, amplitudes=amplitudes)


def varpro_modes(ep, theta) -> np.ndarray:
    """Optimal modes ``W = X pinv(V_theta)`` for fixed eigenvalues."""
    x = _data(ep)
    return x @ pinv(vandermonde(as_theta(theta), x.shape[1]))


def _projected(x, theta):
    v = vandermonde(as_theta(theta), x.shape[1])
    vp = pinv(v)
    w = x @ vp
    return w, w @ v


def f_dmd(ep, theta) -> float:
    """Reconstruction loss ``||X - X pinv(V) V||_F^2 / tau``."""
    x = _data(ep)
    _, fitted = _projected(x, theta)
    return float(np.linalg.norm(x - fitted) ** 2 / x.shape[1])


def f_dmd_grad(ep, theta) -> np.ndarray:
    """Wirtinger derivative of :func:`f_dmd` with respect to each eigenvalue.

    With residual ``R = X - X V^+ V`` and ``W = X V^+`` the derivative with
    respect to the Vandermonde matrix is ``-(R^H W)^T / tau``.
    """
    x = _data(ep)
    theta = as_theta(theta)
    w, fitted = _projected(x, theta)
    resid = x - fitted
    dv = -(resid.conj().T @ w).T / x.shape[1]
    return contract_vandermonde_deriv(dv, theta)


def reconstruct(ep, theta, return_residue: bool = False):
    """Real part of ``X pinv(V) V``; optionally also the max imaginary residue."""
    x = _data(ep)
    _, fitted = _projected(x, theta)
    residue = float(np.max(np.abs(fitted.imag))) if fitted.size else 0.0
    if residue > 1e-8:
        log.debug("reconstruction imaginary residue %.3g dropped", residue)
    if return_residue:
        return fitted.real.copy(), residue
    return fitted.real.copy()


def temporal_profile(fit: DmdFit, ep, j: int, tau: int | None = None) -> np.ndarray:
    """``t -> theta_j**(t-1) * amplitude_j`` for t = 1..tau."""
    if not 0 <= j < fit.theta.size:
        raise IndexError(f"mode index {j} out of range")
    if tau is None:
        tau = _data(ep).shape[1]
    amp = 1.0 if fit.amplitudes is None else fit.amplitudes[j]
    return vandermonde(fit.theta[j : j + 1], tau)[0] * amp
