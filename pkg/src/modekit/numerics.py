"""Dense complex linear-algebra primitives.

Matrices are plain ``numpy.ndarray`` objects (C order, complex128 unless the
caller passes real data). Every routine is a pure function of its inputs.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from modekit import _backend

DEFAULT_RTOL = 1e-10


class NumericalError(RuntimeError):
    """An iterative decomposition failed or produced non-finite output."""


class RankDeficiencyError(ValueError):
    """The requested rank exceeds the numerical rank of the data."""

    def __init__(self, message: str, achievable_rank: int):
        super().__init__(message)
        self.achievable_rank = achievable_rank


class SvdFactors(NamedTuple):
    u: np.ndarray
    s: np.ndarray
    vh: np.ndarray


def _check_finite(m: np.ndarray) -> None:
    if not np.all(np.isfinite(m)):
        raise NumericalError("matrix contains non-finite entries")


def svd(m: np.ndarray) -> SvdFactors:
    """Thin SVD with a deterministic phase convention.

    Each left singular vector is rotated so that its largest-magnitude entry
    is real and positive; the matching row of ``vh`` absorbs the conjugate
    phase so that ``u @ diag(s) @ vh`` is unchanged.
    """
    m = np.asarray(m)
    if m.ndim != 2 or m.size == 0:
        raise ValueError(f"svd needs a nonempty 2-d matrix, got shape {m.shape}")
    _check_finite(m)
    try:
        u, s, vh = np.linalg.svd(m, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"SVD did not converge: {exc}") from exc
    u = u.astype(np.result_type(u, np.complex128), copy=False)
    vh = vh.astype(np.result_type(vh, np.complex128), copy=False)
    idx = np.argmax(np.abs(u), axis=0)
    pivots = u[idx, np.arange(u.shape[1])]
    mag = np.abs(pivots)
    phase = np.where(mag > 0, pivots / np.where(mag > 0, mag, 1.0), 1.0)
    u = u * phase.conj()[None, :]
    vh = vh * phase[:, None]
    return SvdFactors(u, s, vh)


def numerical_rank(s: np.ndarray, rtol: float = DEFAULT_RTOL) -> int:
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.count_nonzero(s > rtol * s[0]))


def pinv(m: np.ndarray, rtol: float = DEFAULT_RTOL) -> np.ndarray:
    """Moore-Penrose pseudoinverse; singular values <= ``rtol * s_max`` are dropped."""
    if not 0 < rtol < 1:
        raise ValueError("rtol must lie in (0, 1)")
    u, s, vh = svd(m)
    k = numerical_rank(s, rtol)
    if k == 0:
        return np.zeros((m.shape[1], m.shape[0]), dtype=u.dtype)
    return (vh[:k].conj().T / s[:k]) @ u[:, :k].conj().T


def range_basis(m: np.ndarray, rtol: float = DEFAULT_RTOL) -> np.ndarray:
    """Orthonormal basis (left singular vectors) of the column space of ``m``."""
    if not 0 < rtol < 1:
        raise ValueError("rtol must lie in (0, 1)")
    u, s, _ = svd(m)
    return u[:, : numerical_rank(s, rtol)]


def vandermonde(theta, tau: int) -> np.ndarray:
    """r x tau matrix whose j-th row is ``[1, theta_j, ..., theta_j**(tau-1)]``."""
    theta = np.ascontiguousarray(np.atleast_1d(np.asarray(theta, dtype=np.complex128)))
    if tau < 1:
        raise ValueError("tau must be >= 1")
    if theta.size == 0:
        raise ValueError("theta must be nonempty")
    return _backend.vandermonde(theta, int(tau))


def vandermonde_deriv(theta, tau: int, j: int) -> np.ndarray:
    """Derivative of :func:`vandermonde` with respect to ``theta[j]``.

    Only row ``j`` is nonzero: ``[0, 1, 2 theta_j, ..., (tau-1) theta_j**(tau-2)]``.
    """
    theta = np.ascontiguousarray(np.atleast_1d(np.asarray(theta, dtype=np.complex128)))
    if not 0 <= j < theta.size:
        raise IndexError(f"mode index {j} out of range for r={theta.size}")
    out = np.zeros((theta.size, tau), dtype=np.complex128)
    out[j] = _backend.vandermonde_deriv_rows(theta[j : j + 1], int(tau))[0]
    return out


def contract_vandermonde_deriv(g: np.ndarray, theta) -> np.ndarray:
    """``sum(g * vandermonde_deriv(theta, tau, j))`` for every ``j`` at once.

    ``g`` is an r x tau matrix (a derivative with respect to the Vandermonde
    matrix); the result is the length-r vector of derivatives with respect to
    each ``theta_j``.
    """
    theta = np.ascontiguousarray(np.atleast_1d(np.asarray(theta, dtype=np.complex128)))
    g = np.ascontiguousarray(g, dtype=np.complex128)
    if g.shape[0] != theta.size:
        raise ValueError("g must have one row per theta entry")
    return _backend.contract_vandermonde_deriv(g, theta)
