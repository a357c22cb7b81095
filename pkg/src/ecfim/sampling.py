"""EC data generation, exact scores, and the Monte Carlo validation oracles.

Data generation implements the stochastic representation
``x = mu + sqrt(Q) Sigma^(1/2) u`` with ``u`` uniform on the complex sphere
and ``Q`` the squared modular variate: independently per snapshot for the
i.i.d.-snapshot family ("ems"), or once for the whole vectorized M*T-variate
("evs"). ``Sigma^(1/2)`` is the Hermitian PSD square root, so datasets are
reproducible bit-for-bit from (master_seed, stream_index).

Per-trial draw order (fixed; reproducibility depends on it):

1. one block of standard normals of shape (T, M, 2) for the sphere draws,
2. the modular draws: per-snapshot Gamma draws for the Gaussian family, the
   (numerator, denominator) Gamma pair for Student, uniforms for tabulated
   inverse-CDF sampling.

Monte Carlo trial i uses the substream ``stream_index + i``, which makes
results independent of any external parallelization over trials.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.integrate import cumulative_trapezoid
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from . import backend
from .constants import MC_INCONCLUSIVE_FRACTION, MC_MIN_TRIALS, MC_SIGMA_GATE
from .errors import (
    ContractError,
    DefinitenessError,
    DomainError,
    SamplerConstructionError,
)
from .fim import FimMatrix, fim_ems, fim_evs
from .generators import (
    GaussianGenerator,
    StudentGenerator,
    TabulatedGenerator,
    eval_phi,
    log_density_norm,
    modular_moments,
    modular_pdf,
)
from .models import ModelEval, evaluate_model
from .serialize import fmt17

KINDS = ("ems", "evs")

# Fixed accumulation chunk; reductions inside a chunk use non-optimized
# einsum, so reports are bit-identical across runs and thread counts.
_MC_CHUNK = 2048

_QUANTILE_GRID_SIZE = 8193
_QUANTILE_ROUNDTRIP_TOL = 1e-6
_QUANTILE_MASS_TOL = 1e-4


def normalize_kind(kind):
    k = str(kind).lower()
    if k not in KINDS:
        raise DomainError(f"kind must be one of {KINDS}, got {kind!r}")
    return k


@dataclass(frozen=True)
class RngStream:
    """Deterministic substream address: (master_seed, stream_index).

    Distinct stream indices under one master seed give statistically
    independent numpy Generators; the output sequence is fully determined by
    the pair.
    """

    master_seed: int
    stream_index: int = 0

    def __post_init__(self):
        if not 0 <= int(self.master_seed) < 2**64:
            raise DomainError("master_seed must be a 64-bit unsigned integer")
        if int(self.stream_index) < 0:
            raise DomainError("stream_index must be non-negative")
        object.__setattr__(self, "master_seed", int(self.master_seed))
        object.__setattr__(self, "stream_index", int(self.stream_index))

    def generator(self):
        return np.random.default_rng([self.master_seed, self.stream_index])

    def child(self, offset):
        return RngStream(self.master_seed, self.stream_index + int(offset))


def _as_generator(rng):
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    raise ContractError("rng must be an RngStream or numpy Generator")


def _complex_standard_normal(gen, shape):
    z = gen.standard_normal(size=tuple(shape) + (2,))
    return (z[..., 0] + 1j * z[..., 1]) / np.sqrt(2.0)


def _normalize_rows(z, gen, dim):
    """Unit-norm rows; redraws any row whose norm underflows (measure zero)."""
    norms = np.sqrt(np.einsum("...m,...m->...", z.conj(), z).real)
    while np.any(norms < 1e-150):
        bad = norms < 1e-150
        fresh = _complex_standard_normal(gen, (int(np.count_nonzero(bad)), dim))
        z = np.array(z)
        z[bad] = fresh
        norms = np.sqrt(np.einsum("...m,...m->...", z.conj(), z).real)
    return z / norms[..., None]


def sample_sphere(dim, rng, size=None):
    """Uniform draw(s) on the complex unit sphere of the given dimension.

    A standard complex Gaussian vector is normalized to unit norm. Returns a
    (dim,) vector, or (size, dim) when ``size`` is given.
    """
    if dim < 1:
        raise DomainError("dim must be a positive integer")
    gen = _as_generator(rng)
    shape = (dim,) if size is None else (int(size), dim)
    z = _complex_standard_normal(gen, shape)
    return _normalize_rows(z, gen, dim)


def _tabulated_quantile(generator, dim):
    """Inverse-CDF sampler for a tabulated generator's modular density."""
    cache = generator._cache
    key = ("quantile", dim)
    if key in cache:
        return cache[key]
    lo, hi = generator.domain
    grid = np.union1d(np.linspace(lo, hi, _QUANTILE_GRID_SIZE), generator.grid)
    pdf = modular_pdf(generator, dim, grid)
    cdf = cumulative_trapezoid(pdf, grid, initial=0.0)
    total = float(cdf[-1])
    if abs(total - 1.0) > _QUANTILE_MASS_TOL:
        raise SamplerConstructionError(
            f"modular CDF table mass {total:.6f} deviates from 1; "
            "grid too coarse or too short for this dimension"
        )
    cdf = cdf / total
    keep = np.concatenate([[True], np.diff(cdf) > 0])
    if np.count_nonzero(keep) < 8:
        raise SamplerConstructionError("modular CDF is numerically flat")
    inverse = PchipInterpolator(cdf[keep], grid[keep])
    forward = PchipInterpolator(grid, cdf)
    probes = np.linspace(0.005, 0.995, 199)
    roundtrip = float(np.max(np.abs(forward(inverse(probes)) - probes)))
    if roundtrip > _QUANTILE_ROUNDTRIP_TOL:
        raise SamplerConstructionError(
            f"inverse-CDF table round-trip error {roundtrip:.3e} exceeds "
            f"{_QUANTILE_ROUNDTRIP_TOL:g}"
        )

    def quantile(u):
        return np.clip(inverse(u), lo, hi)

    cache[key] = quantile
    return quantile


def _modular_draws(generator, dim, gen, size=None):
    """Modular-variate draw(s) from a raw numpy Generator (fixed draw order)."""
    if isinstance(generator, GaussianGenerator):
        return gen.gamma(shape=dim, scale=1.0, size=size)
    if isinstance(generator, StudentGenerator):
        num = gen.gamma(shape=dim, scale=1.0, size=size)
        den = gen.gamma(shape=generator.dof, scale=1.0, size=size)
        return generator.dof * num / den
    if isinstance(generator, TabulatedGenerator):
        quantile = _tabulated_quantile(generator, dim)
        u = gen.random(size=size)
        out = quantile(u)
        return float(out) if size is None else np.asarray(out, dtype=float)
    raise ContractError(f"no sampler for generator family {generator.family!r}")


def sample_modular(generator, dim, rng, size=None):
    """Draw of the (squared) modular variate Q at ambient dimension ``dim``.

    Gaussian draws from Gamma(dim, 1) (the complex chi-square); Student with
    d degrees of freedom draws ``d * Gamma(dim, 1) / Gamma(d, 1)`` (a scaled
    F-variate); tabulated generators invert a precomputed monotone CDF table.
    """
    if dim < 1:
        raise DomainError("dim must be a positive integer")
    return _modular_draws(generator, int(dim), _as_generator(rng), size)


@dataclass(frozen=True)
class EcDataset:
    """An M x T complex snapshot matrix plus the metadata that produced it."""

    snapshots: np.ndarray
    kind: str
    master_seed: int
    stream_index: int
    generator_tag: str
    model_name: str = ""
    theta: tuple = ()

    def __post_init__(self):
        snaps = np.asarray(self.snapshots, dtype=complex)
        if snaps.ndim != 2:
            raise ContractError("snapshots must be an M x T matrix")
        if not np.all(np.isfinite(snaps)):
            raise ContractError("snapshots must be finite")
        object.__setattr__(self, "snapshots", snaps)
        object.__setattr__(self, "kind", normalize_kind(self.kind))
        object.__setattr__(self, "theta", tuple(float(v) for v in self.theta))

    @property
    def M(self):
        return self.snapshots.shape[0]

    @property
    def T(self):
        return self.snapshots.shape[1]


def _psd_sqrt(scatter):
    """Hermitian PSD square root (eigendecomposition), the canonical factor."""
    lam, vec = np.linalg.eigh(scatter)
    lam = np.clip(lam, 0.0, None)
    root = (vec * np.sqrt(lam)) @ vec.conj().T
    return 0.5 * (root + root.conj().T)


def _draw_centered(generator, s_half, m, t, kind, gen):
    """One centered draw, shape (T, M): sqrt(Q) Sigma^(1/2) u per the kind."""
    z = _complex_standard_normal(gen, (t, m))
    if kind == "ems":
        u = _normalize_rows(z, gen, m)
        q = _modular_draws(generator, m, gen, size=t)
        scaled = u * np.sqrt(q)[:, None]
    else:
        flat = _normalize_rows(z.reshape(1, m * t), gen, m * t).reshape(t, m)
        q = _modular_draws(generator, m * t, gen, size=None)
        scaled = flat * np.sqrt(q)
    # fixed-order contraction: row t of the result is Sigma^(1/2) u_t
    return np.einsum("mk,tk->tm", s_half, scaled)


def sample_dataset(model, theta, generator, T, kind, rng):
    """Draw one dataset from the model at theta under the given EC family.

    "ems": x_t = mu_t + sqrt(Q_t) Sigma^(1/2) u_t with independent (Q_t, u_t)
    per snapshot, Q_t at ambient dimension M. "evs": one Q at dimension M*T
    and a single u on the M*T-sphere applied blockwise.
    """
    kind = normalize_kind(kind)
    if T != model.T:
        raise ContractError(f"T={T} does not match the model's T={model.T}")
    if not isinstance(rng, RngStream):
        raise ContractError("sample_dataset requires an RngStream for metadata")
    ev = evaluate_model(model, theta)
    s_half = _psd_sqrt(ev.scatter)
    gen = rng.generator()
    resid = _draw_centered(generator, s_half, ev.M, ev.T, kind, gen)
    theta_values = theta.values if hasattr(theta, "values") else np.asarray(theta, float)
    return EcDataset(
        snapshots=ev.means + resid.T,
        kind=kind,
        master_seed=rng.master_seed,
        stream_index=rng.stream_index,
        generator_tag=generator.description,
        model_name=model.name,
        theta=tuple(theta_values),
    )


# ---------------------------------------------------------------------------
# scores and log-likelihoods
# ---------------------------------------------------------------------------


def _score_pieces(ev: ModelEval):
    """Materialized W = Sigma^-1, B_j = W Sigma_j W, W d_jt, tr(W Sigma_j)."""
    try:
        cho = cho_factor(ev.scatter, lower=True)
    except LinAlgError as exc:
        smallest = float(np.linalg.eigvalsh(ev.scatter)[0])
        raise DefinitenessError(
            f"scatter factorization failed (smallest eigenvalue {smallest:.3e})",
            smallest_eigenvalue=smallest,
        ) from exc
    m, p = ev.M, ev.p
    w = cho_solve(cho, np.eye(m, dtype=complex))
    w = 0.5 * (w + w.conj().T)
    b = np.empty((p, m, m), dtype=complex)
    wd = np.empty((p, ev.T, m), dtype=complex)
    trace_vec = np.empty(p)
    for j in range(p):
        a_j = cho_solve(cho, ev.scatter_derivs[j])
        trace_vec[j] = float(a_j.trace().real)
        bj = a_j @ w
        b[j] = 0.5 * (bj + bj.conj().T)
        wd[j] = (w @ ev.mean_jacobians[j]).T
    return w, b, wd, trace_vec


def _check_dataset(ev, dataset, kind):
    if dataset.kind != kind:
        raise ContractError(f"dataset kind {dataset.kind!r}, expected {kind!r}")
    if dataset.snapshots.shape != (ev.M, ev.T):
        raise ContractError(
            f"dataset is {dataset.snapshots.shape}, model evaluation is "
            f"({ev.M}, {ev.T})"
        )


def score_ems(ev: ModelEval, generator, dataset: EcDataset):
    """Exact log-likelihood gradient for i.i.d. elliptical snapshots.

    ``dL/dtheta_j = -T tr(Sigma^-1 Sigma_j) + sum_t phi(eta_t) deta_t/dtheta_j``
    with ``eta_t`` the per-snapshot quadratic form and phi at dimension M.
    """
    _check_dataset(ev, dataset, "ems")
    w, b, wd, trace_vec = _score_pieces(ev)
    resid = np.ascontiguousarray((dataset.snapshots - ev.means).T)[None, :, :]
    eta, deta = backend.batch_eta_deta(resid, w, b, wd)
    phi = np.asarray(eval_phi(generator, eta[0], ev.M), dtype=float)
    return -ev.T * trace_vec + np.einsum("pt,t->p", deta[0], phi)


def score_evs(ev: ModelEval, generator, dataset: EcDataset):
    """Exact score for the vectorized family: one phi at dimension M*T."""
    _check_dataset(ev, dataset, "evs")
    w, b, wd, trace_vec = _score_pieces(ev)
    resid = np.ascontiguousarray((dataset.snapshots - ev.means).T)[None, :, :]
    eta, deta = backend.batch_eta_deta(resid, w, b, wd)
    phi = float(eval_phi(generator, float(eta[0].sum()), ev.M * ev.T))
    return -ev.T * trace_vec + phi * np.einsum("pt->p", deta[0])


def _eta_values(ev, dataset):
    w, _, _, _ = _score_pieces(ev)
    resid = (dataset.snapshots - ev.means).T
    return np.einsum("tm,mk,tk->t", resid.conj(), w, resid).real


def loglik_ems(ev: ModelEval, generator, dataset: EcDataset, cfg=None):
    """Full log-likelihood (normalization constant included)."""
    _check_dataset(ev, dataset, "ems")
    eta = _eta_values(ev, dataset)
    _, logdet = np.linalg.slogdet(ev.scatter)
    log_norm = log_density_norm(generator, ev.M, cfg)
    return float(
        ev.T * log_norm - ev.T * logdet + np.sum(generator.log_g(eta, ev.M))
    )


def loglik_evs(ev: ModelEval, generator, dataset: EcDataset, cfg=None):
    """Full log-likelihood of the vectorized family."""
    _check_dataset(ev, dataset, "evs")
    eta = _eta_values(ev, dataset)
    _, logdet = np.linalg.slogdet(ev.scatter)
    dim = ev.M * ev.T
    log_norm = log_density_norm(generator, dim, cfg)
    return float(log_norm - ev.T * logdet + generator.log_g(float(eta.sum()), dim))


# ---------------------------------------------------------------------------
# Monte Carlo oracles
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class McScalar:
    """A Monte Carlo scalar estimate with its standard error."""

    estimate: float
    stderr: float
    n_trials: int


@dataclass(frozen=True)
class McComplexScalar:
    """A complex MC estimate with per-component standard errors."""

    estimate: complex
    stderr_re: float
    stderr_im: float
    n_trials: int


@dataclass(frozen=True, eq=False)
class McReport:
    """Empirical score/FIM statistics against the matching closed form.

    ``fim_entries_consistent`` is True when every empirical entry lies within
    ``sigma_gate`` standard errors of the analytic value; likewise
    ``score_mean_consistent`` for the zero-mean-score condition.
    ``inconclusive_entries`` lists (j, k) whose standard error exceeds the
    configured fraction of the analytic magnitude: the run cannot resolve
    them either way.
    """

    empirical: FimMatrix
    analytic: FimMatrix
    n_trials: int
    max_rel_err: float
    per_entry_stderr: np.ndarray
    score_mean: np.ndarray
    score_mean_stderr: np.ndarray
    fim_entries_consistent: bool
    score_mean_consistent: bool
    inconclusive_entries: tuple
    sigma_gate: float
    kind: str
    model_name: str
    generator_tag: str
    master_seed: int
    stream_index: int

    def __post_init__(self):
        if self.n_trials < MC_MIN_TRIALS:
            raise DomainError(f"n_trials must be at least {MC_MIN_TRIALS}")
        if np.any(np.asarray(self.per_entry_stderr) < 0):
            raise ContractError("standard errors must be non-negative")

    @property
    def passes(self):
        return self.fim_entries_consistent and self.score_mean_consistent

    def to_dict(self):
        """Plain-python dict for deterministic JSON rendering."""
        return {
            "model": self.model_name,
            "generator": self.generator_tag,
            "kind": self.kind.upper(),
            "seed": {
                "master_seed": self.master_seed,
                "stream_index": self.stream_index,
            },
            "n_trials": self.n_trials,
            "sigma_gate": self.sigma_gate,
            "analytic_fim": self.analytic.entries,
            "empirical_fim": self.empirical.entries,
            "per_entry_stderr": self.per_entry_stderr,
            "score_mean": self.score_mean,
            "score_mean_stderr": self.score_mean_stderr,
            "max_rel_err": self.max_rel_err,
            "fim_entries_consistent": bool(self.fim_entries_consistent),
            "score_mean_consistent": bool(self.score_mean_consistent),
            "inconclusive_entries": [list(e) for e in self.inconclusive_entries],
            "passes": bool(self.passes),
        }


def empirical_fim(model, theta, generator, T, kind, n_trials, rng,
                  sigma_gate=MC_SIGMA_GATE):
    """Estimate the FIM as the average of score outer products.

    Trial i draws its dataset from substream ``rng.stream_index + i`` and its
    score is computed with the exact score function; the report compares the
    averaged outer product against the matching closed form entry by entry,
    and the score sample mean against zero.
    """
    kind = normalize_kind(kind)
    n_trials = int(n_trials)
    if n_trials < MC_MIN_TRIALS:
        raise DomainError(f"n_trials must be at least {MC_MIN_TRIALS}")
    if not isinstance(rng, RngStream):
        raise ContractError("empirical_fim requires an RngStream")
    if T != model.T:
        raise ContractError(f"T={T} does not match the model's T={model.T}")

    ev = evaluate_model(model, theta)
    m, t_count, p = ev.M, ev.T, ev.p
    dim = m if kind == "ems" else m * t_count
    moments = modular_moments(generator, dim, method="auto")
    analytic = (
        fim_ems(ev, moments, T) if kind == "ems" else fim_evs(ev, moments, T)
    )
    w, b, wd, trace_vec = _score_pieces(ev)
    s_half = _psd_sqrt(ev.scatter)

    sum_s = np.zeros(p)
    sum_s2 = np.zeros(p)
    sum_outer = np.zeros((p, p))
    sum_outer2 = np.zeros((p, p))
    resid = np.empty((_MC_CHUNK, t_count, m), dtype=complex)

    for start in range(0, n_trials, _MC_CHUNK):
        count = min(_MC_CHUNK, n_trials - start)
        for i in range(count):
            gen_i = np.random.default_rng(
                [rng.master_seed, rng.stream_index + start + i]
            )
            resid[i] = _draw_centered(generator, s_half, m, t_count, kind, gen_i)
        eta, deta = backend.batch_eta_deta(resid[:count], w, b, wd)
        if kind == "ems":
            phi = np.asarray(eval_phi(generator, eta, m), dtype=float)
            scores = -t_count * trace_vec + np.einsum("nt,npt->np", phi, deta)
        else:
            phi = np.asarray(
                eval_phi(generator, np.einsum("nt->n", eta), m * t_count),
                dtype=float,
            )
            scores = -t_count * trace_vec + phi[:, None] * np.einsum("npt->np", deta)
        sum_s += np.einsum("np->p", scores)
        sum_s2 += np.einsum("np,np->p", scores, scores)
        sum_outer += np.einsum("np,nq->pq", scores, scores)
        sq = scores * scores
        sum_outer2 += np.einsum("np,nq->pq", sq, sq)

    emp = sum_outer / n_trials
    entry_var = np.clip(sum_outer2 / n_trials - emp * emp, 0.0, None)
    entry_stderr = np.sqrt(entry_var / n_trials)
    score_mean = sum_s / n_trials
    score_var = np.clip(sum_s2 / n_trials - score_mean * score_mean, 0.0, None)
    score_stderr = np.sqrt(score_var / n_trials)

    scale = max(float(np.max(np.abs(analytic.entries))), 1e-300)
    gap = np.abs(emp - analytic.entries)
    fim_ok = bool(np.all(gap <= sigma_gate * entry_stderr + 1e-12 * scale))
    score_ok = bool(
        np.all(np.abs(score_mean) <= sigma_gate * score_stderr + 1e-12 * np.sqrt(scale))
    )
    significant = np.abs(analytic.entries) > 1e-12 * scale
    inconclusive = [
        (j, k)
        for j in range(p)
        for k in range(j, p)
        if significant[j, k]
        and entry_stderr[j, k] > MC_INCONCLUSIVE_FRACTION * abs(analytic.entries[j, k])
    ]

    return McReport(
        empirical=FimMatrix(entries=emp, family_tag=analytic.family_tag,
                            moments_used=moments),
        analytic=analytic,
        n_trials=n_trials,
        max_rel_err=float(np.max(gap) / scale),
        per_entry_stderr=entry_stderr,
        score_mean=score_mean,
        score_mean_stderr=score_stderr,
        fim_entries_consistent=fim_ok,
        score_mean_consistent=score_ok,
        inconclusive_entries=tuple(inconclusive),
        sigma_gate=float(sigma_gate),
        kind=kind,
        model_name=model.name,
        generator_tag=generator.description,
        master_seed=rng.master_seed,
        stream_index=rng.stream_index,
    )


def _check_hermitian(mat, name):
    mat = np.asarray(mat, dtype=complex)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ContractError(f"{name} must be a square matrix")
    scale = max(float(np.max(np.abs(mat))), 1.0)
    if float(np.max(np.abs(mat - mat.conj().T))) > 1e-12 * scale:
        raise ContractError(f"{name} must be Hermitian")
    return mat


def quartic_sphere_closed_form(a_mat, b_mat, dim):
    """(tr A tr B + tr(AB)) / (dim (dim + 1)) for Hermitian A, B."""
    a_mat = _check_hermitian(a_mat, "A")
    b_mat = _check_hermitian(b_mat, "B")
    num = (a_mat.trace() * b_mat.trace() + (a_mat @ b_mat).trace()).real
    return float(num) / (dim * (dim + 1.0))


def quartic_sphere_oracle(a_mat, b_mat, dim, n_trials, rng):
    """MC estimate of E[(u^H A u)(u^H B u)] on the complex dim-sphere.

    The closed form is :func:`quartic_sphere_closed_form`; the companion
    :func:`odd_moment_sphere_oracle` checks the vanishing odd moment
    E[(u^H a)(u^H B u)] = 0.
    """
    a_mat = _check_hermitian(a_mat, "A")
    b_mat = _check_hermitian(b_mat, "B")
    if a_mat.shape != (dim, dim) or b_mat.shape != (dim, dim):
        raise ContractError("A and B must be dim x dim")
    gen = _as_generator(rng)
    n_trials = int(n_trials)
    total = 0.0
    total_sq = 0.0
    chunk = 1 << 16
    for start in range(0, n_trials, chunk):
        count = min(chunk, n_trials - start)
        u = sample_sphere(dim, gen, size=count)
        qa = np.einsum("nm,nm->n", u.conj(), np.einsum("mk,nk->nm", a_mat, u)).real
        qb = np.einsum("nm,nm->n", u.conj(), np.einsum("mk,nk->nm", b_mat, u)).real
        vals = qa * qb
        total += float(np.einsum("n->", vals))
        total_sq += float(np.einsum("n,n->", vals, vals))
    mean = total / n_trials
    var = max(total_sq / n_trials - mean * mean, 0.0)
    return McScalar(estimate=mean, stderr=float(np.sqrt(var / n_trials)),
                    n_trials=n_trials)


def odd_moment_sphere_oracle(a_vec, b_mat, dim, n_trials, rng):
    """MC estimate of E[(u^H a)(u^H B u)]; identically zero on the sphere."""
    b_mat = _check_hermitian(b_mat, "B")
    a_vec = np.asarray(a_vec, dtype=complex).reshape(-1)
    if a_vec.size != dim:
        raise ContractError("a must have length dim")
    gen = _as_generator(rng)
    n_trials = int(n_trials)
    total = 0.0 + 0.0j
    total_sq_re = 0.0
    total_sq_im = 0.0
    chunk = 1 << 16
    for start in range(0, n_trials, chunk):
        count = min(chunk, n_trials - start)
        u = sample_sphere(dim, gen, size=count)
        lin = np.einsum("nm,m->n", u.conj(), a_vec)
        qb = np.einsum("nm,nm->n", u.conj(), np.einsum("mk,nk->nm", b_mat, u)).real
        vals = lin * qb
        total += complex(np.einsum("n->", vals))
        total_sq_re += float(np.einsum("n,n->", vals.real, vals.real))
        total_sq_im += float(np.einsum("n,n->", vals.imag, vals.imag))
    mean = total / n_trials
    var_re = max(total_sq_re / n_trials - mean.real**2, 0.0)
    var_im = max(total_sq_im / n_trials - mean.imag**2, 0.0)
    return McComplexScalar(
        estimate=mean,
        stderr_re=float(np.sqrt(var_re / n_trials)),
        stderr_im=float(np.sqrt(var_im / n_trials)),
        n_trials=n_trials,
    )


# ---------------------------------------------------------------------------
# dataset export
# ---------------------------------------------------------------------------


def dataset_to_csv_text(dataset: EcDataset):
    """CSV rows (t, m, re, im), row-major over snapshots then components."""
    lines = ["t,m,re,im"]
    snaps = dataset.snapshots
    for t in range(dataset.T):
        for m in range(dataset.M):
            z = snaps[m, t]
            lines.append(f"{t},{m},{fmt17(z.real)},{fmt17(z.imag)}")
    return "\n".join(lines) + "\n"


def dataset_header_dict(dataset: EcDataset):
    """Self-describing header: model, theta, generator, kind, seed, shape."""
    return {
        "model": dataset.model_name,
        "theta": list(dataset.theta),
        "generator": dataset.generator_tag,
        "kind": dataset.kind.upper(),
        "seed": {
            "master_seed": dataset.master_seed,
            "stream_index": dataset.stream_index,
        },
        "M": dataset.M,
        "T": dataset.T,
        "columns": ["t", "m", "re", "im"],
    }
