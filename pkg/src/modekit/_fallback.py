"""Pure NumPy versions of the hot kernels in ``_kernels.pyx``.

Signatures and results match the compiled module exactly; ``_backend`` picks
one at import time.
"""

import numpy as np


def vandermonde(theta, tau):
    r = theta.shape[0]
    out = np.empty((r, tau), dtype=np.complex128)
    out[:, 0] = 1.0
    for t in range(1, tau):
        out[:, t] = out[:, t - 1] * theta
    return out


def vandermonde_deriv_rows(theta, tau):
    r = theta.shape[0]
    out = np.zeros((r, tau), dtype=np.complex128)
    if tau > 1:
        out[:, 1] = 1.0
        power = np.ones(r, dtype=np.complex128)
        for t in range(2, tau):
            power = power * theta
            out[:, t] = t * power
    return out


def contract_vandermonde_deriv(g, theta):
    tau = g.shape[1]
    return np.einsum("jt,jt->j", g, vandermonde_deriv_rows(theta, tau))


def projection_gram(stacked, offsets):
    """K[a, b] = ||A_a^H A_b||_F^2 for bases stored side by side in ``stacked``.

    ``offsets`` has n + 1 entries; basis ``a`` occupies columns
    ``offsets[a]:offsets[a + 1]``.
    """
    n = offsets.shape[0] - 1
    gram = np.abs(stacked.conj().T @ stacked) ** 2
    out = np.zeros((n, n))
    nonempty = offsets[1:] > offsets[:-1]
    idx = offsets[:-1][nonempty]
    if idx.size:
        rows = np.add.reduceat(gram, idx, axis=0)
        block = np.add.reduceat(rows, idx, axis=1)
        keep = np.flatnonzero(nonempty)
        out[np.ix_(keep, keep)] = block
    # BLAS need not return an exactly Hermitian product; mirror the upper triangle
    return np.triu(out) + np.triu(out, 1).T
