# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels. ``_fallback.py`` holds the reference NumPy versions."""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def vandermonde(const double complex[::1] theta, Py_ssize_t tau):
    cdef Py_ssize_t r = theta.shape[0]
    cdef Py_ssize_t j, t
    cdef double complex x, acc
    out = np.empty((r, tau), dtype=np.complex128)
    cdef double complex[:, ::1] o = out
    with nogil:
        for j in range(r):
            x = theta[j]
            acc = 1.0
            o[j, 0] = acc
            for t in range(1, tau):
                acc = acc * x
                o[j, t] = acc
    return out


def vandermonde_deriv_rows(const double complex[::1] theta, Py_ssize_t tau):
    cdef Py_ssize_t r = theta.shape[0]
    cdef Py_ssize_t j, t
    cdef double complex x, power
    out = np.zeros((r, tau), dtype=np.complex128)
    cdef double complex[:, ::1] o = out
    with nogil:
        for j in range(r):
            if tau > 1:
                o[j, 1] = 1.0
            x = theta[j]
            power = 1.0
            for t in range(2, tau):
                power = power * x
                o[j, t] = t * power
    return out


def contract_vandermonde_deriv(const double complex[:, ::1] g,
                               const double complex[::1] theta):
    cdef Py_ssize_t r = g.shape[0]
    cdef Py_ssize_t tau = g.shape[1]
    cdef Py_ssize_t j, t
    cdef double complex x, power, acc
    out = np.zeros(r, dtype=np.complex128)
    cdef double complex[::1] o = out
    with nogil:
        for j in range(r):
            if tau < 2:
                continue
            x = theta[j]
            acc = g[j, 1]
            power = 1.0
            for t in range(2, tau):
                power = power * x
                acc = acc + g[j, t] * (t * power)
            o[j] = acc
    return out


def projection_gram(const double complex[:, ::1] stacked,
                    const cnp.int64_t[::1] offsets):
    cdef Py_ssize_t n = offsets.shape[0] - 1
    cdef Py_ssize_t a, b, ca, cb
    cdef double acc
    cdef double complex z
    arr = np.asarray(stacked)
    # inner products through BLAS; only the block reduction runs here
    cdef double complex[:, ::1] g = np.ascontiguousarray(arr.conj().T @ arr)
    out = np.zeros((n, n))
    cdef double[:, ::1] o = out
    with nogil:
        for a in range(n):
            for b in range(a, n):
                acc = 0.0
                for ca in range(offsets[a], offsets[a + 1]):
                    for cb in range(offsets[b], offsets[b + 1]):
                        z = g[ca, cb]
                        acc = acc + z.real * z.real + z.imag * z.imag
                o[a, b] = acc
                o[b, a] = acc
    return out
