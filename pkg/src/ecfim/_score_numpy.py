"""Pure-numpy implementation of the batched score kernel.

Given n centered datasets, computes the per-snapshot quadratic forms
``eta[n, t] = r_t^H W r_t`` and the score building blocks
``deta[n, j, t] = -2 Re{(W d_jt)^H r_t} - r_t^H B_j r_t`` where W is the
scatter inverse, ``B_j = W Sigma_j W`` and ``d_jt`` the mean derivatives.

Reductions use non-optimized einsum so the summation order is fixed: results
are bit-identical across runs and BLAS thread counts.
"""

import numpy as np


def batch_eta_deta(residuals, w, b, wd):
    """residuals: (n, T, M) complex; w: (M, M); b: (p, M, M); wd: (p, T, M).

    Returns ``(eta, deta)`` with shapes (n, T) and (n, p, T), both float64.
    """
    rc = residuals.conj()
    wr = np.einsum("mk,ntk->ntm", w, residuals)
    eta = np.einsum("ntm,ntm->nt", rc, wr).real
    br = np.einsum("pmk,ntk->pntm", b, residuals)
    quad = np.einsum("ntm,pntm->npt", rc, br).real
    cross = np.einsum("ptm,ntm->npt", wd.conj(), residuals).real
    return eta, -2.0 * cross - quad
