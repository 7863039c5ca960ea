"""Two-class synthetic episodes: a label-specific mode plus a shared mode.

Each episode is ``x_t = l_d**t w_d[y] + l_c**t w_c + e_t`` (t = 1..tau) with
``l = exp(-gamma + i*omega)``, omega drawn uniformly per episode, and
circularly-symmetric complex Gaussian noise ``e``. Stored episodes are the
real part of that sequence unless ``complex_output`` is set.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from modekit.dmd import Episode


def default_modes(side: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(w_d for class 1, w_d for class 2, shared w_c) as flattened side x side images.

    Class 1 is a two-pixel vertical bar near the left edge, class 2 the same
    bar transposed (near the top edge), and the shared mode an isotropic
    Gaussian bump in the centre. The bars sit away from the bump so the
    label-specific modes are not dominated by the shared one. All three have
    unit Euclidean norm.
    """
    rows, cols = np.mgrid[0:side, 0:side].astype(float)
    lo, hi = max(0, side // 10), max(1, side // 10) + max(1, side // 5)
    vertical = ((cols >= lo) & (cols < hi)).astype(float)
    horizontal = ((rows >= lo) & (rows < hi)).astype(float)
    centre = (side - 1) / 2.0
    bump = np.exp(-((rows - centre) ** 2 + (cols - centre) ** 2) / (2.0 * (0.2 * side) ** 2))
    modes = [m.ravel() for m in (vertical, horizontal, bump)]
    return tuple(m / np.linalg.norm(m) for m in modes)


@dataclass(frozen=True)
class SynthConfig:
    n: int = 20
    tau: int = 100
    image_side: int = 10
    gamma_d: float = 0.1
    gamma_c: float = 0.1
    omega_d_range: tuple[float, float] = (0.0, 1.0)
    omega_c_range: tuple[float, float] = (0.0, 1.0)
    noise_sd: float = 0.05
    seed: int = 0
    complex_output: bool = False

    def __post_init__(self):
        if self.n < 2 or self.n % 2:
            raise ValueError("n must be a positive even number (two balanced classes)")
        if self.tau < 2 or self.image_side < 1:
            raise ValueError("tau must be >= 2 and image_side >= 1")
        if self.noise_sd < 0 or self.gamma_d < 0 or self.gamma_c < 0:
            raise ValueError("noise_sd and decay rates must be nonnegative")

    @property
    def p(self) -> int:
        return self.image_side**2


@dataclass(frozen=True)
class SynthTruth:
    lambda_d: np.ndarray
    lambda_c: np.ndarray
    w_d: tuple[np.ndarray, np.ndarray]
    w_c: np.ndarray


def gen_synthetic(cfg: SynthConfig = SynthConfig(), return_truth: bool = False):
    rng = np.random.default_rng(cfg.seed)
    w_d1, w_d2, w_c = default_modes(cfg.image_side)
    half = cfg.n // 2
    labels = [1] * half + [2] * half
    omega_d = rng.uniform(*cfg.omega_d_range, size=cfg.n)
    omega_c = rng.uniform(*cfg.omega_c_range, size=cfg.n)
    lam_d = np.exp(-cfg.gamma_d + 1j * omega_d)
    lam_c = np.exp(-cfg.gamma_c + 1j * omega_c)
    t = np.arange(1, cfg.tau + 1)
    episodes = []
    for i, y in enumerate(labels):
        w_d = w_d1 if y == 1 else w_d2
        x = np.outer(w_d, lam_d[i] ** t) + np.outer(w_c, lam_c[i] ** t)
        noise = rng.standard_normal((2, cfg.p, cfg.tau)) * (cfg.noise_sd / np.sqrt(2.0))
        x = x + noise[0] + 1j * noise[1]
        if not cfg.complex_output:
            x = x.real.copy()
        episodes.append(Episode(x, y, f"ep{i:03d}"))
    if return_truth:
        return episodes, SynthTruth(lam_d, lam_c, (w_d1, w_d2), w_c)
    return episodes
