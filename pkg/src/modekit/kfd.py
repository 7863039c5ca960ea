"""Kernel Fisher discriminant quality of a labeled set of subspaces.

``Q1`` is the mean pairwise ratio ``tr(S_l S_m) / (tr(S_l S_l) + tr(S_m S_m))``
of feature-space class covariances (with the ``1/n_l`` normalization) and
``Q2`` the weighted sum of squared distances between class means. Both are
computed from the kernel matrix alone:

    tr(S_l S_m)      = ||H_l K_lm H_m||_F^2 / (n_l n_m)
    ||mu_l - mu_m||^2 = mean(K_ll) - 2 mean(K_lm) + mean(K_mm)

where ``H_l`` is the n_l x n_l centering matrix. Gradients are formed as
``dF/dK`` (entries treated as independent) contracted with the per-pair
kernel derivatives.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from modekit._parallel import pmap
from modekit.dms_kernel import DMSBasis, gram_matrix, k_dms_grad_many

log = logging.getLogger(__name__)

DEGENERATE_TOL = 1e-20


class ConfigurationError(ValueError):
    """Labels do not describe a usable class structure."""


@dataclass(frozen=True)
class ClassIndex:
    classes: tuple
    members: tuple  # members[l] = dataset indices of class l, in dataset order

    @classmethod
    def from_labels(cls, labels) -> "ClassIndex":
        labels = list(labels)
        classes = tuple(sorted(set(labels)))
        if len(classes) < 2:
            raise ConfigurationError(f"need at least two classes, got {len(classes)}")
        members = tuple(
            np.array([i for i, y in enumerate(labels) if y == c], dtype=np.intp) for c in classes
        )
        return cls(classes, members)

    @property
    def n(self) -> int:
        return int(sum(m.size for m in self.members))

    @property
    def counts(self) -> list[int]:
        return [m.size for m in self.members]


@dataclass
class ClassGram:
    kernel: np.ndarray
    index: ClassIndex
    slabs: np.ndarray | None = None  # slabs[a, b, j] = d k(a, b) / d theta_{a, j}
    flags: set = field(default_factory=set)

    def block(self, l: int, m: int) -> np.ndarray:
        return self.kernel[np.ix_(self.index.members[l], self.index.members[m])]

    def centered_block(self, l: int, m: int) -> np.ndarray:
        """``K_lm (I - O_{n_m})``: columns centered within class ``m``."""
        blk = self.block(l, m)
        return blk - blk.mean(axis=1, keepdims=True)


def assemble_gram(bases: list[DMSBasis], labels, with_grads: bool = True) -> ClassGram:
    if len(bases) != len(labels):
        raise ConfigurationError("bases and labels differ in length")
    index = ClassIndex.from_labels(labels)
    kernel = gram_matrix(bases)
    slabs = None
    if with_grads:
        slabs = np.stack(pmap(lambda a: k_dms_grad_many(a, bases), bases))
    return ClassGram(kernel, index, slabs)


def _double_centered(blk: np.ndarray) -> np.ndarray:
    return blk - blk.mean(axis=0, keepdims=True) - blk.mean(axis=1, keepdims=True) + blk.mean()


def _q1_parts(gram: ClassGram):
    """Per-class-pair traces and their ``dT/dK`` blocks."""
    idx = gram.index
    c = len(idx.classes)
    traces = np.zeros((c, c))
    dblocks = {}
    for l in range(c):
        for m in range(l, c):
            cen = _double_centered(gram.block(l, m))
            norm = idx.members[l].size * idx.members[m].size
            traces[l, m] = traces[m, l] = np.sum(cen * cen) / norm
            dblocks[l, m] = 2.0 * cen / norm
    return traces, dblocks


def q1(gram: ClassGram) -> float:
    return _q1_value_and_dk(gram, need_grad=False)[0]


def _q1_value_and_dk(gram: ClassGram, need_grad: bool = True):
    idx = gram.index
    c = len(idx.classes)
    coef = 2.0 / (c * (c - 1))
    traces, dblocks = _q1_parts(gram)
    value = 0.0
    dk = np.zeros_like(gram.kernel) if need_grad else None
    for l in range(c - 1):
        for m in range(l + 1, c):
            den = traces[l, l] + traces[m, m]
            if den <= DEGENERATE_TOL:
                gram.flags.add("q1_degenerate")
                continue
            value += coef * traces[l, m] / den
            if need_grad:
                d_cross = coef / den
                d_self = -coef * traces[l, m] / den**2
                dk[np.ix_(idx.members[l], idx.members[m])] += d_cross * dblocks[l, m]
                dk[np.ix_(idx.members[l], idx.members[l])] += d_self * dblocks[l, l]
                dk[np.ix_(idx.members[m], idx.members[m])] += d_self * dblocks[m, m]
    if "q1_degenerate" in gram.flags:
        log.debug("Q1: zero within-class spread for some class pair; term set to 0")
    return value, dk


def _q2_value_and_dk(gram: ClassGram, need_grad: bool = True):
    idx = gram.index
    c, n = len(idx.classes), idx.n
    value = 0.0
    dk = np.zeros_like(gram.kernel) if need_grad else None
    for l in range(c - 1):
        for m in range(l + 1, c):
            nl, nm = idx.members[l].size, idx.members[m].size
            weight = nl * nm / n**2
            dist2 = gram.block(l, l).mean() - 2.0 * gram.block(l, m).mean() + gram.block(m, m).mean()
            value += weight * dist2
            if need_grad:
                dk[np.ix_(idx.members[l], idx.members[l])] += weight / nl**2
                dk[np.ix_(idx.members[m], idx.members[m])] += weight / nm**2
                dk[np.ix_(idx.members[l], idx.members[m])] -= 2.0 * weight / (nl * nm)
    return value, dk


def q2(gram: ClassGram) -> float:
    return _q2_value_and_dk(gram, need_grad=False)[0]


def f_kfd(gram: ClassGram) -> float:
    return q1(gram) * q2(gram)


def _contract(gram: ClassGram, dk: np.ndarray) -> np.ndarray:
    if gram.slabs is None:
        raise ValueError("gram was assembled without gradient slabs")
    sym = dk + dk.T
    return np.einsum("ab,abj->aj", sym, gram.slabs)


def f_kfd_value_and_grad(gram: ClassGram):
    """(f_KFD, Q1, Q2, d f_KFD / d theta as an (n, r) array)."""
    v1, d1 = _q1_value_and_dk(gram)
    v2, d2 = _q2_value_and_dk(gram)
    grad = _contract(gram, d1 * v2 + d2 * v1)
    return v1 * v2, v1, v2, grad


def q1_grad(gram: ClassGram) -> np.ndarray:
    return _contract(gram, _q1_value_and_dk(gram)[1])


def q2_grad(gram: ClassGram) -> np.ndarray:
    return _contract(gram, _q2_value_and_dk(gram)[1])


def f_kfd_grad(gram: ClassGram, theta_index: tuple[int, int] | None = None):
    """Wirtinger derivative of Q1*Q2; one entry ``(episode, mode)`` or all (n, r)."""
    grad = f_kfd_value_and_grad(gram)[3]
    if theta_index is None:
        return grad
    i, j = theta_index
    return complex(grad[i, j])
