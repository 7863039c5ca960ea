"""Evaluation helpers: NRMSE, PCA baseline, classical MDS, mode summaries."""

from __future__ import annotations

import logging

import numpy as np

from modekit.dmd import _data

log = logging.getLogger(__name__)


def nrmse(original, reconstruction) -> float:
    """``||X - Xhat||_F / ||X - mean_t(X)||_F``; the temporal-mean predictor scores 1."""
    x = np.asarray(_data(original))
    xhat = np.asarray(reconstruction)
    if x.shape != xhat.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {xhat.shape}")
    spread = np.linalg.norm(x - x.mean(axis=1, keepdims=True))
    if spread == 0:
        raise ValueError("episode has zero temporal variance; NRMSE is undefined")
    return float(np.linalg.norm(x - xhat) / spread)


def pca_baseline(ep, k: int) -> tuple[np.ndarray, float]:
    """Rank-k PCA reconstruction (temporal mean + top-k principal components)."""
    x = np.asarray(_data(ep))
    p, tau = x.shape
    if not 0 <= k <= min(p, tau):
        raise ValueError(f"k={k} must lie in [0, {min(p, tau)}]")
    mean = x.mean(axis=1, keepdims=True)
    centred = x - mean
    u, s, vh = np.linalg.svd(centred, full_matrices=False)
    recon = mean + (u[:, :k] * s[:k]) @ vh[:k]
    return recon, nrmse(x, recon)


def mds_embed(distances: np.ndarray, dims: int = 2) -> np.ndarray:
    """Classical MDS: eigendecomposition of ``-1/2 J D^2 J``.

    Axes with nonpositive eigenvalues are returned as zeros. Each axis is
    sign-flipped so its first nonzero coordinate is positive.
    """
    d = np.asarray(distances, dtype=float)
    if d.ndim != 2 or d.shape[0] != d.shape[1]:
        raise ValueError("distance matrix must be square")
    if not np.allclose(d, d.T, atol=1e-12):
        raise ValueError("distance matrix must be symmetric")
    n = d.shape[0]
    j = np.eye(n) - 1.0 / n
    b = -0.5 * j @ (d**2) @ j
    b = 0.5 * (b + b.T)
    evals, evecs = np.linalg.eigh(b)
    order = np.argsort(evals)[::-1][:dims]
    evals, evecs = evals[order], evecs[:, order]
    tol = 1e-12 * max(1.0, float(np.abs(evals).max(initial=0.0)))
    keep = evals > tol
    if keep.sum() < dims:
        log.info("MDS: only %d positive eigenvalue(s); padding with zero axes", int(keep.sum()))
    coords = np.zeros((n, dims))
    coords[:, : evals.size] = evecs * np.sqrt(np.where(keep, evals, 0.0))
    coords -= coords.mean(axis=0)
    for a in range(dims):
        nz = np.flatnonzero(np.abs(coords[:, a]) > 1e-12)
        if nz.size and coords[nz[0], a] < 0:
            coords[:, a] *= -1.0
    return coords


def phase_align(w: np.ndarray) -> np.ndarray:
    """Rotate ``w`` so its largest-magnitude entry is real and positive."""
    k = int(np.argmax(np.abs(w)))
    mag = abs(w[k])
    return w if mag == 0 else w * (np.conj(w[k]) / mag)


def dominant_mode(modes: np.ndarray) -> np.ndarray:
    """Column of largest Euclidean norm, phase-aligned."""
    return phase_align(modes[:, int(np.argmax(np.linalg.norm(modes, axis=0)))])


def dominant_mode_summary(modes: list[np.ndarray], labels) -> dict:
    """Per-class elementwise median (real and imaginary parts separately)."""
    labels = list(labels)
    out = {}
    for cls in sorted(set(labels)):
        doms = np.array([dominant_mode(w) for w, y in zip(modes, labels) if y == cls])
        out[cls] = np.median(doms.real, axis=0) + 1j * np.median(doms.imag, axis=0)
    return out


def abs_cosine(a: np.ndarray, b: np.ndarray) -> float:
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        return 0.0
    return float(abs(np.vdot(a, b)) / (na * nb))


def loo_1nn_accuracy(distances: np.ndarray, labels) -> float:
    """Leave-one-out 1-nearest-neighbour accuracy; ties go to the lowest index."""
    d = np.array(distances, dtype=float)
    np.fill_diagonal(d, np.inf)
    labels = np.asarray(labels)
    return float(np.mean(labels[np.argmin(d, axis=1)] == labels))
