"""Discriminant DMD: objective, gradient and the quasi-Newton fit.

The objective over the eigenvalue sets of all n episodes is

    mean_i f_dmd(X_i, theta_i) / (f_kfd(theta_1..n) ** alpha + epsilon)

Parameters are handled as the real vector ``[Re(theta).ravel(), Im(theta).ravel()]``;
the corresponding real gradient is ``2 * conj(df/dtheta)`` split the same way.
"""

from __future__ import annotations

import logging
import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from modekit import dmd, kfd
from modekit._parallel import pmap
from modekit.dmd import Episode, exact_dmd, separate_thetas, varpro_modes
from modekit.dms_kernel import dms_basis
from modekit.numerics import DEFAULT_RTOL, contract_vandermonde_deriv

log = logging.getLogger(__name__)

LBFGS_MEMORY = 10
ARMIJO_C = 1e-4
BACKTRACK = 0.5
MAX_BACKTRACKS = 60


class ObjectiveError(ValueError):
    """The objective is undefined for this configuration."""


@dataclass(frozen=True)
class FitConfig:
    r: int
    alpha: float = 0.0
    epsilon: float = 1e-8
    max_iters: int = 500
    grad_tol: float = 1e-6
    step_tol: float = 1e-10
    seed: int = 0
    rank_rtol: float = DEFAULT_RTOL

    def __post_init__(self):
        if self.r < 1:
            raise ValueError("r must be >= 1")
        if self.alpha < 0 or self.epsilon < 0:
            raise ValueError("alpha and epsilon must be nonnegative")
        if self.grad_tol <= 0 or self.step_tol <= 0 or not 0 < self.rank_rtol < 1:
            raise ValueError("tolerances must be positive")
        if self.max_iters < 0:
            raise ValueError("max_iters must be >= 0")


@dataclass
class FitResult:
    thetas: np.ndarray  # (n, r) complex
    modes: list
    objective_trace: np.ndarray  # rows: (total, f_dmd_mean, f_kfd) per accepted iterate
    converged: bool
    reason: str
    init_thetas: np.ndarray
    iterations: int = 0
    diagnostics: dict = field(default_factory=dict)

    @property
    def final(self) -> tuple[float, float, float]:
        total, f_dmd_mean, f_kfd_value = self.objective_trace[-1]
        return float(total), float(f_dmd_mean), float(f_kfd_value)


def pack(thetas: np.ndarray) -> np.ndarray:
    thetas = np.asarray(thetas, dtype=np.complex128)
    return np.concatenate([thetas.real.ravel(), thetas.imag.ravel()])


def unpack(vec: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    half = vec.size // 2
    return (vec[:half] + 1j * vec[half:]).reshape(shape)


def wirtinger_to_real(deriv: np.ndarray) -> np.ndarray:
    """Stacked real gradient from holomorphic derivatives: ``2 * conj(d)``."""
    grad = 2.0 * np.conj(deriv)
    return np.concatenate([grad.real.ravel(), grad.imag.ravel()])


def _labels(dataset):
    return [ep.label for ep in dataset]


def _as_thetas(dataset, thetas) -> np.ndarray:
    thetas = np.asarray(thetas, dtype=np.complex128)
    if thetas.ndim != 2 or thetas.shape[0] != len(dataset):
        raise ValueError(f"thetas must have shape (n={len(dataset)}, r), got {thetas.shape}")
    return thetas


def _dmd_part(dataset, thetas, need_grad: bool):
    """Mean reconstruction loss and its derivative (the 1/n factor lives here)."""
    n = len(dataset)

    def one(i):
        x = dataset[i].snapshots
        w, fitted = dmd._projected(x, thetas[i])
        resid = x - fitted
        loss = np.linalg.norm(resid) ** 2 / x.shape[1]
        if not need_grad:
            return loss, None
        dv = -(resid.conj().T @ w).T / x.shape[1]
        return loss, contract_vandermonde_deriv(dv, thetas[i])

    parts = pmap(one, range(n))
    mean = float(sum(p[0] for p in parts) / n)
    if not need_grad:
        return mean, None
    return mean, np.stack([p[1] for p in parts]) / n


def _kfd_part(dataset, thetas, cfg: FitConfig, need_grad: bool):
    bases = pmap(lambda i: dms_basis(dataset[i], thetas[i], cfg.rank_rtol), range(len(dataset)))
    gram = kfd.assemble_gram(bases, _labels(dataset), with_grads=need_grad)
    if need_grad:
        value, _, _, grad = kfd.f_kfd_value_and_grad(gram)
    else:
        value, grad = kfd.f_kfd(gram), None
    return value, grad, gram.flags


def _denominator(f_kfd_value: float, cfg: FitConfig) -> float:
    if cfg.alpha == 0:
        return 1.0 + cfg.epsilon
    denom = f_kfd_value**cfg.alpha + cfg.epsilon
    if denom == 0:
        raise ObjectiveError("f_KFD is zero and epsilon = 0; use epsilon > 0")
    return denom


def objective(dataset, thetas, cfg: FitConfig) -> tuple[float, float, float]:
    """(total, f_dmd_mean, f_kfd) at ``thetas``."""
    thetas = _as_thetas(dataset, thetas)
    f_dmd_mean, _ = _dmd_part(dataset, thetas, need_grad=False)
    f_kfd_value, _, _ = _kfd_part(dataset, thetas, cfg, need_grad=False)
    return f_dmd_mean / _denominator(f_kfd_value, cfg), f_dmd_mean, f_kfd_value


def _value_and_deriv(dataset, thetas, cfg: FitConfig, diagnostics: dict | None = None):
    """Objective triple plus the (n, r) Wirtinger derivative of the total."""
    if cfg.alpha == 0:
        return _optdmd_value_and_deriv(dataset, thetas, cfg)
    f_dmd_mean, d_dmd = _dmd_part(dataset, thetas, need_grad=True)
    f_kfd_value, d_kfd, flags = _kfd_part(dataset, thetas, cfg, need_grad=True)
    denom = _denominator(f_kfd_value, cfg)
    total = f_dmd_mean / denom
    if f_kfd_value == 0 and cfg.alpha < 1:
        if diagnostics is not None:
            diagnostics["singular_kfd_gradient"] = diagnostics.get("singular_kfd_gradient", 0) + 1
        log.warning("f_KFD = 0 with alpha < 1: discriminant gradient term dropped")
        deriv = d_dmd / denom
    else:
        deriv = (
            denom * d_dmd - cfg.alpha * f_dmd_mean * f_kfd_value ** (cfg.alpha - 1) * d_kfd
        ) / denom**2
    if diagnostics is not None and flags:
        diagnostics.setdefault("kfd_flags", set()).update(flags)
    return (total, f_dmd_mean, f_kfd_value), deriv


def gradient(dataset, thetas, cfg: FitConfig) -> np.ndarray:
    """Stacked real gradient ``[Re; Im]`` of the objective, length 2 n r."""
    thetas = _as_thetas(dataset, thetas)
    _, deriv = _value_and_deriv(dataset, thetas, cfg)
    return wirtinger_to_real(deriv)


def _report_kfd(dataset, thetas, cfg: FitConfig) -> float:
    """f_KFD for the trace only; NaN when undefined (one class, degenerate subspace)."""
    if not _multiclass(dataset):
        return math.nan
    try:
        return _kfd_part(dataset, thetas, cfg, need_grad=False)[0]
    except ValueError:
        return math.nan


def _optdmd_value_and_deriv(dataset, thetas, cfg: FitConfig, diagnostics=None):
    f_dmd_mean, d_dmd = _dmd_part(dataset, thetas, need_grad=True)
    f_kfd_value = _report_kfd(dataset, thetas, cfg)
    denom = 1.0 + cfg.epsilon
    return (f_dmd_mean / denom, f_dmd_mean, f_kfd_value), d_dmd / denom


def _optdmd_value(dataset, thetas, cfg: FitConfig) -> float:
    return _dmd_part(dataset, thetas, need_grad=False)[0] / (1.0 + cfg.epsilon)


def _multiclass(dataset) -> bool:
    return len(set(_labels(dataset))) >= 2


def initial_thetas(dataset, cfg: FitConfig) -> np.ndarray:
    return np.stack([exact_dmd(ep, cfg.r, cfg.rank_rtol).theta for ep in dataset])


def _validate(dataset, cfg: FitConfig) -> None:
    if not dataset:
        raise ValueError("empty dataset")
    ps = {ep.p for ep in dataset}
    if len(ps) != 1:
        raise ValueError(f"episodes disagree on snapshot dimension: {sorted(ps)}")
    limit = min(min(ep.p, ep.tau - 1) for ep in dataset)
    if cfg.r > limit:
        raise ValueError(f"r={cfg.r} exceeds min over episodes of min(p, tau-1) = {limit}")


def _separate_all(thetas: np.ndarray) -> tuple[np.ndarray, int]:
    out = np.empty_like(thetas)
    total = 0
    for i, row in enumerate(thetas):
        out[i], nudges = separate_thetas(row)
        total += nudges
    return out, total


def _two_loop(grad: np.ndarray, memory: deque) -> np.ndarray:
    q = grad.copy()
    alphas = []
    for s, y, rho in reversed(memory):
        a = rho * (s @ q)
        alphas.append(a)
        q -= a * y
    if memory:
        s, y, _ = memory[-1]
        q *= (s @ y) / (y @ y)
    for (s, y, rho), a in zip(memory, reversed(alphas)):
        b = rho * (y @ q)
        q += (a - b) * s
    return -q


def minimize(value_and_deriv, value_only, x0: np.ndarray, shape, cfg: FitConfig):
    """Limited-memory BFGS with Armijo backtracking over the stacked real vector.

    ``value_and_deriv(thetas)`` returns ``((total, f_dmd, f_kfd), dF/dtheta)``;
    ``value_only(thetas)`` returns the total. Returns (x, trace, converged,
    reason, iterations, diagnostics).
    """
    diagnostics: dict = {"nudges": 0, "rejected_points": 0}
    thetas, nudges = _separate_all(unpack(x0, shape))
    diagnostics["nudges"] += nudges
    x = pack(thetas)
    triple, deriv = value_and_deriv(thetas)
    if not all(math.isfinite(v) for v in triple[:2]):
        raise ObjectiveError(f"objective is not finite at the initial point: {triple}")
    g = wirtinger_to_real(deriv)
    f = triple[0]
    trace = [triple]
    memory: deque = deque(maxlen=LBFGS_MEMORY)
    converged, reason, it = False, "max_iters", 0

    def trial_value(xt):
        th, k = _separate_all(unpack(xt, shape))
        try:
            val = value_only(th)
        except (ValueError, np.linalg.LinAlgError):
            val = math.inf
        return pack(th), val, k

    while it < cfg.max_iters:
        if np.max(np.abs(g)) < cfg.grad_tol:
            converged, reason = True, "gradient"
            break
        d = _two_loop(g, memory)
        slope = g @ d
        if not slope < 0:
            memory.clear()
            d = -g
            slope = g @ d
        step = 1.0 if memory else min(1.0, 1.0 / np.linalg.norm(g))
        accepted = False
        for _ in range(MAX_BACKTRACKS):
            x_new, f_new, k = trial_value(x + step * d)
            usable = math.isfinite(f_new)
            if usable and f_new <= f + ARMIJO_C * step * slope:
                # the gradient can still be undefined here (e.g. a rank-deficient
                # mode matrix); such points are rejected like non-finite ones
                try:
                    triple, deriv = value_and_deriv(unpack(x_new, shape))
                except (ValueError, np.linalg.LinAlgError) as exc:
                    log.debug("gradient undefined at trial point: %s", exc)
                    usable = False
                else:
                    accepted = True
                    diagnostics["nudges"] += k
                    break
            if not usable:
                diagnostics["rejected_points"] += 1
            step *= BACKTRACK
        if not accepted:
            reason = "line_search"
            break
        it += 1
        g_new = wirtinger_to_real(deriv)
        s, y = x_new - x, g_new - g
        sy = s @ y
        if sy > 1e-12 * np.linalg.norm(s) * np.linalg.norm(y):
            memory.append((s, y, 1.0 / sy))
        x, g, f = x_new, g_new, triple[0]
        trace.append(triple)
        if np.max(np.abs(s)) < cfg.step_tol:
            converged, reason = True, "step"
            break
    if diagnostics["nudges"]:
        log.info("eigenvalue distinctness guard fired %d time(s)", diagnostics["nudges"])
    return x, np.array(trace), converged, reason, it, diagnostics


def _finish(dataset, x, shape, trace, converged, reason, it, diag, init) -> FitResult:
    thetas = unpack(x, shape)
    modes = [varpro_modes(ep, th) for ep, th in zip(dataset, thetas)]
    return FitResult(
        thetas=thetas,
        modes=modes,
        objective_trace=trace,
        converged=converged,
        reason=reason,
        init_thetas=init,
        iterations=it,
        diagnostics=diag,
    )


def fit(dataset: list[Episode], cfg: FitConfig, init: np.ndarray | None = None) -> FitResult:
    """Discriminant DMD from exact-DMD initial eigenvalues (or ``init``)."""
    _validate(dataset, cfg)
    if not _multiclass(dataset):
        raise kfd.ConfigurationError("discriminant DMD needs at least two classes")
    init = initial_thetas(dataset, cfg) if init is None else _as_thetas(dataset, init).copy()
    shape = init.shape
    diag_box: dict = {}

    def value_and_deriv(th):
        return _value_and_deriv(dataset, th, cfg, diag_box)

    def value_only(th):
        if cfg.alpha == 0:
            return _optdmd_value(dataset, th, cfg)
        return objective(dataset, th, cfg)[0]

    x, trace, converged, reason, it, diag = minimize(value_and_deriv, value_only, pack(init), shape, cfg)
    diag.update(diag_box)
    log.info("fit alpha=%g: %s after %d iterations, objective %.6g", cfg.alpha, reason, it, trace[-1][0])
    return _finish(dataset, x, shape, trace, converged, reason, it, diag, init)


def fit_optimized_dmd(dataset: list[Episode], cfg: FitConfig, init: np.ndarray | None = None) -> FitResult:
    """Plain optimized DMD of every episode under one joint quasi-Newton run.

    Minimizes ``mean_i f_dmd / (1 + epsilon)``, the alpha = 0 normalization,
    so its trace is directly comparable with :func:`fit` at alpha = 0. Labels
    are not used except to report f_KFD when two or more classes exist.
    """
    _validate(dataset, cfg)
    init = initial_thetas(dataset, cfg) if init is None else _as_thetas(dataset, init).copy()
    shape = init.shape

    def value_and_deriv(th):
        return _optdmd_value_and_deriv(dataset, th, cfg)

    def value_only(th):
        return _optdmd_value(dataset, th, cfg)

    x, trace, converged, reason, it, diag = minimize(value_and_deriv, value_only, pack(init), shape, cfg)
    return _finish(dataset, x, shape, trace, converged, reason, it, diag, init)
