# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled batched score kernel; see _score_numpy for the reference semantics.

Plain C loops over trials/snapshots: deterministic summation order, no
threading, no temporaries. The numpy fallback computes the same quantities;
backend.py picks whichever is importable.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def batch_eta_deta(const double complex[:, :, ::1] residuals,
                   const double complex[:, ::1] w,
                   const double complex[:, :, ::1] b,
                   const double complex[:, :, ::1] wd):
    """residuals: (n, T, M); w: (M, M); b: (p, M, M); wd: (p, T, M).

    Returns (eta, deta): float64 arrays of shape (n, T) and (n, p, T).
    """
    cdef Py_ssize_t n = residuals.shape[0]
    cdef Py_ssize_t T = residuals.shape[1]
    cdef Py_ssize_t M = residuals.shape[2]
    cdef Py_ssize_t p = b.shape[0]

    eta_arr = np.empty((n, T), dtype=np.float64)
    deta_arr = np.empty((n, p, T), dtype=np.float64)
    cdef double[:, ::1] eta = eta_arr
    cdef double[:, :, ::1] deta = deta_arr

    cdef Py_ssize_t i, t, j, m, k
    cdef double complex acc, rm, row
    cdef double quad, cross

    for i in range(n):
        for t in range(T):
            # eta = r^H W r
            acc = 0
            for m in range(M):
                row = 0
                for k in range(M):
                    row = row + w[m, k] * residuals[i, t, k]
                acc = acc + row * residuals[i, t, m].conjugate()
            eta[i, t] = acc.real

            for j in range(p):
                # quad = r^H B_j r, cross = Re{(W d_jt)^H r}
                acc = 0
                cross = 0
                for m in range(M):
                    row = 0
                    for k in range(M):
                        row = row + b[j, m, k] * residuals[i, t, k]
                    acc = acc + row * residuals[i, t, m].conjugate()
                    cross = cross + (wd[j, t, m].conjugate() * residuals[i, t, m]).real
                quad = acc.real
                deta[i, j, t] = -2.0 * cross - quad

    return eta_arr, deta_arr
