"""Dynamic-mode subspaces and the projection kernel between them.

The subspace of an episode ``X`` under eigenvalues ``theta`` is the column
space of ``W = X pinv(V_theta)``. Two subspaces are compared with the
projection kernel ``||A^H B||_F^2`` (sum of squared cosines of the principal
angles), whose Wirtinger derivative with respect to ``theta`` of the left
argument is

    dk/dV = ( V+ V+^H C^H (I - V V+) + (I - V+ V) C^H V+^H V+ - V+ C V+ )^T
    C     = W+ B B^H (I - A A^H) X

with ``A`` and ``B`` the orthonormal bases of the two subspaces.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from modekit import _backend
from modekit.dmd import Episode, _data, as_theta
from modekit.numerics import (
    DEFAULT_RTOL,
    RankDeficiencyError,
    SvdFactors,
    numerical_rank,
    pinv,
    svd,
    vandermonde,
    vandermonde_deriv,
)


class DegenerateSubspaceError(ValueError):
    """The mode matrix of an episode has numerical rank zero."""


@dataclass(frozen=True, eq=False)
class DMSBasis:
    basis: np.ndarray
    svd_cache: SvdFactors
    theta: np.ndarray
    x: np.ndarray
    vander: np.ndarray
    vander_pinv: np.ndarray
    episode_id: str = ""

    @property
    def rank(self) -> int:
        return self.basis.shape[1]

    @property
    def p(self) -> int:
        return self.basis.shape[0]

    @property
    def full_rank(self) -> bool:
        return self.rank == self.theta.size

    def projector(self) -> np.ndarray:
        return self.basis @ self.basis.conj().T

    def modes_pinv(self) -> np.ndarray:
        """``W+ = B S^-1 A^H`` on the retained rank."""
        u, s, vh = self.svd_cache
        k = self.rank
        return (vh[:k].conj().T / s[:k]) @ u[:, :k].conj().T


def dms_basis(ep, theta, rtol: float = DEFAULT_RTOL) -> DMSBasis:
    x = _data(ep)
    theta = as_theta(theta)
    v = vandermonde(theta, x.shape[1])
    vp = pinv(v, rtol)
    factors = svd(x @ vp)
    k = numerical_rank(factors.s, rtol)
    ident = ep.id if isinstance(ep, Episode) else ""
    if k == 0:
        raise DegenerateSubspaceError(f"episode {ident!r}: mode matrix has rank zero")
    return DMSBasis(
        basis=factors.u[:, :k],
        svd_cache=factors,
        theta=theta,
        x=x,
        vander=v,
        vander_pinv=vp,
        episode_id=ident,
    )


def _check_pair(a: DMSBasis, b: DMSBasis) -> None:
    if a.p != b.p:
        raise ValueError(f"ambient dimensions differ: {a.p} vs {b.p}")


def k_dms(a: DMSBasis, b: DMSBasis) -> float:
    _check_pair(a, b)
    # fixed operand order so that k(a, b) and k(b, a) round identically
    if (a.rank, a.basis.tobytes()) > (b.rank, b.basis.tobytes()):
        a, b = b, a
    return float(np.linalg.norm(a.basis.conj().T @ b.basis) ** 2)


def proj_distance(a: DMSBasis, b: DMSBasis) -> float:
    """Projection metric ``sqrt(sum sin^2 angle)``; unequal ranks use the smaller one."""
    return float(np.sqrt(max(0.0, min(a.rank, b.rank) - k_dms(a, b))))


def principal_angles(a: DMSBasis, b: DMSBasis) -> np.ndarray:
    _check_pair(a, b)
    cos = np.linalg.svd(a.basis.conj().T @ b.basis, compute_uv=False)
    return np.arccos(np.clip(cos, -1.0, 1.0))


def _require_full_rank(a: DMSBasis) -> None:
    if not a.full_rank:
        raise RankDeficiencyError(
            f"episode {a.episode_id!r}: mode matrix rank {a.rank} < r={a.theta.size}; "
            "kernel gradient needs every singular value above tolerance",
            a.rank,
        )


def _grad_from_c(a: DMSBasis, c: np.ndarray) -> np.ndarray:
    """Map a stack of C matrices (m, r, tau) to dk/dtheta rows (m, r)."""
    v, vp = a.vander, a.vander_pinv
    ch = np.conj(np.swapaxes(c, 1, 2))  # (m, tau, r)
    gram_inv = vp.conj().T @ vp  # (VV^H)^-1 for full row rank V
    row_resid = np.eye(v.shape[0]) - v @ vp
    t1 = vp @ vp.conj().T @ ch @ row_resid
    m2 = ch @ gram_inv
    t2 = m2 - vp @ (v @ m2)
    t3 = vp @ c @ vp
    gt = t1 + t2 - t3  # (m, tau, r), the transpose of dk/dV
    deriv = _backend.vandermonde_deriv_rows(a.theta, v.shape[1])  # (r, tau)
    return np.einsum("mtj,jt->mj", gt, deriv)


def _c_stack(a: DMSBasis, others: list[DMSBasis]) -> np.ndarray:
    """C_ab = W_a+ B_b B_b^H (I - A_a A_a^H) X_a for every b in ``others``."""
    wp = a.modes_pinv()
    resid = a.x - a.basis @ (a.basis.conj().T @ a.x)
    stacked = np.concatenate([o.basis for o in others], axis=1)
    offsets = np.cumsum([0] + [o.rank for o in others])
    left = wp @ stacked  # (r, R)
    right = stacked.conj().T @ resid  # (R, tau)
    outer = left[:, :, None] * right[None, :, :]  # (r, R, tau)
    c = np.add.reduceat(outer, offsets[:-1], axis=1)  # (r, m, tau)
    return np.ascontiguousarray(np.swapaxes(c, 0, 1))


def k_dms_grad_many(a: DMSBasis, others: list[DMSBasis]) -> np.ndarray:
    """Rows ``d k(a, b) / d theta_a`` for every ``b`` in ``others``; shape (m, r)."""
    _require_full_rank(a)
    for o in others:
        _check_pair(a, o)
    return _grad_from_c(a, _c_stack(a, others))


def k_dms_grad(a: DMSBasis, b: DMSBasis, side: str = "left") -> np.ndarray:
    """Wirtinger derivative of ``k_dms(a, b)`` w.r.t. the eigenvalues of one argument."""
    if side == "left":
        return k_dms_grad_many(a, [b])[0]
    if side == "right":
        return k_dms_grad_many(b, [a])[0]
    raise ValueError(f"side must be 'left' or 'right', not {side!r}")


def k_dms_grad_reference(a: DMSBasis, b: DMSBasis) -> np.ndarray:
    """Unvectorized transcription of the dk/dV expression, one theta at a time."""
    _require_full_rank(a)
    v, vp = a.vander, a.vander_pinv
    c = a.modes_pinv() @ b.projector() @ (np.eye(a.p) - a.projector()) @ a.x
    eye_r, eye_t = np.eye(v.shape[0]), np.eye(v.shape[1])
    vph = vp.conj().T
    gt = (
        vp @ vph @ c.conj().T @ (eye_r - v @ vp).conj().T
        + (eye_t - vp @ v).conj().T @ c.conj().T @ vph @ vp
        - vp @ c @ vp
    )
    g = gt.T
    return np.array(
        [np.sum(g * vandermonde_deriv(a.theta, v.shape[1], j)) for j in range(a.theta.size)]
    )


def gram_matrix(bases: list[DMSBasis]) -> np.ndarray:
    """Full n x n projection-kernel matrix."""
    p = {b.p for b in bases}
    if len(p) > 1:
        raise ValueError(f"bases have different ambient dimensions: {sorted(p)}")
    stacked = np.ascontiguousarray(np.concatenate([b.basis for b in bases], axis=1))
    offsets = np.cumsum([0] + [b.rank for b in bases]).astype(np.int64)
    return _backend.projection_gram(stacked, offsets)


def distance_matrix(bases: list[DMSBasis]) -> np.ndarray:
    gram = gram_matrix(bases)
    ranks = np.array([b.rank for b in bases])
    dist2 = np.minimum.outer(ranks, ranks) - gram
    np.fill_diagonal(dist2, 0.0)
    return np.sqrt(np.maximum(dist2, 0.0))
