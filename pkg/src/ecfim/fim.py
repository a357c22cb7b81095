"""Closed-form Fisher information matrices and Cramer-Rao bounds.

Three assemblies share the same building blocks, computed once per model
evaluation through a Hermitian (Cholesky) factorization of the scatter:

* ``mean_gram[j, k] = sum_t Re{ d mu_t/d theta_j ^H  Sigma^-1  d mu_t/d theta_k }``
* ``trace_vec[j]    = tr(Sigma^-1 Sigma_j)``
* ``trace_prod[j, k] = tr(Sigma^-1 Sigma_j Sigma^-1 Sigma_k)``

The Gaussian matrix is ``2 mean_gram + T trace_prod``. The per-snapshot
elliptical family (one modular variate per snapshot) and the vectorized
family (one shared modular variate) rescale those blocks by the two moments
``E[Q phi^2]`` and ``E[Q^2 phi^2]`` of the modular variate, taken at ambient
dimension M and M*T respectively. With Gaussian moments both reduce exactly
to the Gaussian matrix.

Only the upper triangle is assembled and mirrored, so symmetry is exact.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .constants import CRB_MAX_CONDITION, PSD_SLACK, SYMMETRY_RTOL
from .errors import ContractError, DefinitenessError, SingularFimError
from .generators import ModularMoments
from .models import ModelEval

FAMILY_TAGS = ("gaussian-sb", "ems", "evs")


@dataclass(frozen=True)
class FimMatrix:
    """p x p real symmetric PSD Fisher information matrix."""

    entries: np.ndarray
    family_tag: str
    moments_used: Optional[ModularMoments] = None

    def __post_init__(self):
        entries = np.asarray(self.entries, dtype=float)
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
            raise ContractError("FIM must be a square matrix")
        if self.family_tag not in FAMILY_TAGS:
            raise ContractError(f"unknown family tag {self.family_tag!r}")
        scale = max(float(np.max(np.abs(entries))), 1e-300)
        gap = float(np.max(np.abs(entries - entries.T)))
        if gap > SYMMETRY_RTOL * scale:
            raise DefinitenessError(f"FIM is not symmetric (gap {gap:.3e})")
        eigs = np.linalg.eigvalsh(0.5 * (entries + entries.T))
        lam_max = float(eigs[-1])
        if float(eigs[0]) < -PSD_SLACK * max(lam_max, 0.0):
            raise DefinitenessError(
                f"FIM is not positive semidefinite (eigenvalues {eigs[0]:.3e} "
                f".. {lam_max:.3e})",
                smallest_eigenvalue=float(eigs[0]),
            )
        object.__setattr__(self, "entries", entries)

    @property
    def p(self):
        return self.entries.shape[0]


@dataclass(frozen=True)
class CrbMatrix:
    """Inverse FIM; diagonal entries are the per-parameter variance bounds."""

    entries: np.ndarray
    condition_estimate: float

    def __post_init__(self):
        entries = np.asarray(self.entries, dtype=float)
        scale = max(float(np.max(np.abs(entries))), 1e-300)
        if float(np.max(np.abs(entries - entries.T))) > SYMMETRY_RTOL * scale:
            raise DefinitenessError("CRB matrix is not symmetric")
        if np.any(np.diag(entries) <= 0):
            raise DefinitenessError("CRB diagonal must be strictly positive")
        object.__setattr__(self, "entries", entries)

    @property
    def diagonal(self):
        return np.diag(self.entries).copy()


def _fim_pieces(ev: ModelEval):
    """Shared trace/gram blocks; scatter inverse applied via Cholesky."""
    try:
        cho = cho_factor(ev.scatter, lower=True)
    except LinAlgError as exc:
        smallest = float(np.linalg.eigvalsh(ev.scatter)[0])
        raise DefinitenessError(
            f"scatter factorization failed (smallest eigenvalue {smallest:.3e})",
            smallest_eigenvalue=smallest,
        ) from exc
    p = ev.p
    inv_sig = [cho_solve(cho, ev.scatter_derivs[j]) for j in range(p)]
    inv_jac = [cho_solve(cho, ev.mean_jacobians[j]) for j in range(p)]

    trace_vec = np.array([a.trace().real for a in inv_sig])
    trace_prod = np.zeros((p, p))
    mean_gram = np.zeros((p, p))
    for j in range(p):
        for k in range(j, p):
            trace_prod[j, k] = float(np.sum(inv_sig[j] * inv_sig[k].T).real)
            mean_gram[j, k] = float(
                np.sum(ev.mean_jacobians[j].conj() * inv_jac[k]).real
            )
            trace_prod[k, j] = trace_prod[j, k]
            mean_gram[k, j] = mean_gram[j, k]
    return mean_gram, trace_vec, trace_prod


def fim_gaussian_sb(ev: ModelEval, T: int) -> FimMatrix:
    """Gaussian (Slepian-Bangs) information matrix.

    ``F[j,k] = 2 sum_t Re{dmu_j^H Sigma^-1 dmu_k} + T tr(Sigma^-1 Sigma_j
    Sigma^-1 Sigma_k)``.
    """
    if T != ev.T:
        raise ContractError(f"T={T} does not match the evaluation's T={ev.T}")
    mean_gram, _, trace_prod = _fim_pieces(ev)
    return FimMatrix(entries=2.0 * mean_gram + T * trace_prod, family_tag="gaussian-sb")


def fim_ems(ev: ModelEval, moments: ModularMoments, T: int) -> FimMatrix:
    """Information matrix for i.i.d. elliptical snapshots (one Q per snapshot).

    Moments must be taken at ambient dimension M. The i.i.d. assumption
    collapses the per-snapshot moment sums to ``T * moment``.
    """
    if T != ev.T:
        raise ContractError(f"T={T} does not match the evaluation's T={ev.T}")
    if moments.dim != ev.M:
        raise ContractError(
            f"moments computed at dim={moments.dim}, need dim=M={ev.M}"
        )
    m = ev.M
    mean_gram, trace_vec, trace_prod = _fim_pieces(ev)
    outer = np.outer(trace_vec, trace_vec)
    entries = (
        -T * outer
        + (2.0 / m) * moments.e_q_phi2 * mean_gram
        + (moments.e_q2_phi2 * T / (m * (m + 1.0))) * (outer + trace_prod)
    )
    return FimMatrix(entries=entries, family_tag="ems", moments_used=moments)


def fim_evs(ev: ModelEval, moments: ModularMoments, T: int) -> FimMatrix:
    """Information matrix for the vectorized elliptical family (one shared Q).

    Moments must be taken at ambient dimension M*T.
    """
    if T != ev.T:
        raise ContractError(f"T={T} does not match the evaluation's T={ev.T}")
    if moments.dim != ev.M * T:
        raise ContractError(
            f"moments computed at dim={moments.dim}, need dim=M*T={ev.M * T}"
        )
    m = ev.M
    mean_gram, trace_vec, trace_prod = _fim_pieces(ev)
    outer = np.outer(trace_vec, trace_vec)
    entries = (
        -T * T * outer
        + (2.0 / (m * T)) * moments.e_q_phi2 * mean_gram
        + (moments.e_q2_phi2 / (m * (m * T + 1.0))) * (T * outer + trace_prod)
    )
    return FimMatrix(entries=entries, family_tag="evs", moments_used=moments)


def crb_from_fim(fim: FimMatrix) -> CrbMatrix:
    """Invert the FIM into the Cramer-Rao bound matrix.

    A condition estimate above the configured ceiling raises
    :class:`SingularFimError` instead of silently pseudo-inverting: a
    near-singular FIM signals a non-identifiable parameterization that the
    caller must fix.
    """
    cond = float(np.linalg.cond(fim.entries))
    if not np.isfinite(cond) or cond > CRB_MAX_CONDITION:
        raise SingularFimError(
            f"FIM condition estimate {cond:.3e} exceeds {CRB_MAX_CONDITION:.1e}",
            condition_estimate=cond,
        )
    inv = np.linalg.inv(fim.entries)
    inv = 0.5 * (inv + inv.T)
    return CrbMatrix(entries=inv, condition_estimate=cond)
