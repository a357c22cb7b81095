"""Density generators for complex elliptically contoured distributions.

A generator is the positive function ``g`` shaping the density through the
quadratic form ``eta = (x - mu)^H Sigma^{-1} (x - mu)``. Its log-derivative
``phi = g'/g`` drives every score and information-matrix formula, and the two
scalar moments ``E[Q phi^2(Q)]`` and ``E[Q^2 phi^2(Q)]`` of the modular
variate ``Q`` (density ``delta^{-1} q^{dim-1} g(q)``) are the only quantities
a non-Gaussian family contributes to the information matrix.

The Student family's exponent couples ``g`` to the ambient dimension, so
generator objects store only family parameters and every evaluation site takes
``dim`` explicitly; one generator object serves both the per-snapshot
(``dim = M``) and the vectorized (``dim = M*T``) families.

All generators are immutable after construction; every operation here is pure
and safe to call concurrently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.special import gammaln

from .errors import ContractError, DomainError, GeneratorValidityError, GridRangeError
from .quadrature import DEFAULT_QUADRATURE, integrate_adaptive, integrate_zero_to_inf

# Boundary term q^dim g(q) of the integration-by-parts identity must vanish
# at the ends of a tabulated grid for the zero-mean-score condition to hold.
_BOUNDARY_TERM_TOL = 1e-9

# Grid head must sit essentially at the origin relative to the grid length.
_GRID_START_FRACTION = 1e-2


@dataclass(frozen=True)
class ModularMoments:
    """The pair (E[Q phi^2(Q)], E[Q^2 phi^2(Q)]) at a given ambient dimension.

    ``method`` records provenance: "analytic" for closed forms, "quadrature"
    for numerically integrated values (``est_abs_error`` then carries the
    quadrature error estimate; it is exactly 0 for analytic values).
    """

    dim: int
    e_q_phi2: float
    e_q2_phi2: float
    method: str
    est_abs_error: float = 0.0

    def __post_init__(self):
        if self.dim < 1:
            raise DomainError("dim must be a positive integer")
        if self.method not in ("analytic", "quadrature"):
            raise DomainError(f"unknown moments method {self.method!r}")
        if not (self.e_q_phi2 > 0 and self.e_q2_phi2 > 0):
            raise DomainError("modular moments must be positive")
        if self.method == "analytic" and self.est_abs_error != 0.0:
            raise DomainError("analytic moments carry no error estimate")
        if self.est_abs_error < 0:
            raise DomainError("est_abs_error must be non-negative")


class DensityGenerator:
    """Base class; see :class:`GaussianGenerator`, :class:`StudentGenerator`,
    :class:`TabulatedGenerator`."""

    family = "base"
    description = ""
    has_analytic_moments = False

    #: evaluation domain of g as (lo, hi); (0, inf) for analytic families
    domain = (0.0, math.inf)

    def log_g(self, t, dim):
        raise NotImplementedError

    def phi(self, t, dim):
        raise NotImplementedError

    def analytic_moments(self, dim):
        raise ContractError(f"{self.family} generator has no analytic moments")

    def analytic_log_delta(self, dim):
        return None


@dataclass(frozen=True)
class GaussianGenerator(DensityGenerator):
    """g(t) = exp(-t); the complex Gaussian special case, phi identically -1."""

    family = "gaussian"
    description = "complex Gaussian"
    has_analytic_moments = True

    def log_g(self, t, dim):
        return -np.asarray(t, dtype=float)

    def phi(self, t, dim):
        t = np.asarray(t, dtype=float)
        return np.full_like(t, -1.0)

    def analytic_moments(self, dim):
        return float(dim), float(dim * (dim + 1))

    def analytic_log_delta(self, dim):
        return float(gammaln(dim))


@dataclass(frozen=True)
class StudentGenerator(DensityGenerator):
    """g(t) = (1 + t/d)^-(d+dim) with d degrees of freedom.

    The exponent depends on the ambient dimension, hence the explicit ``dim``
    at every evaluation site. The modular variate follows a scaled
    F-distribution, which gives closed-form moments.
    """

    dof: float

    family = "student"
    has_analytic_moments = True

    def __post_init__(self):
        if not (np.isfinite(self.dof) and self.dof > 0):
            raise DomainError("Student dof must be a positive finite real")

    @property
    def description(self):
        return f"complex Student, dof={self.dof:g}"

    def log_g(self, t, dim):
        t = np.asarray(t, dtype=float)
        return -(self.dof + dim) * np.log1p(t / self.dof)

    def phi(self, t, dim):
        t = np.asarray(t, dtype=float)
        return -((self.dof + dim) / self.dof) / (1.0 + t / self.dof)

    def analytic_moments(self, dim):
        d = self.dof
        e1 = (d + dim) * dim / (d + dim + 1.0)
        return e1, e1 * (dim + 1.0)

    def analytic_log_delta(self, dim):
        d = self.dof
        return float(dim * math.log(d) + gammaln(d) + gammaln(dim) - gammaln(d + dim))


@dataclass(frozen=True, eq=False)
class TabulatedGenerator(DensityGenerator):
    """Generator defined by log g sampled on a finite grid.

    log g is interpolated with a monotone cubic (PCHIP); phi uses centered
    finite differences of log g at the grid nodes (one-sided at the ends),
    themselves PCHIP-interpolated. Evaluation outside the grid raises
    :class:`GridRangeError`.
    """

    grid: np.ndarray
    log_g_values: np.ndarray
    label: str = "tabulated"

    family = "tabulated"

    _log_g_interp: PchipInterpolator = field(init=False, repr=False, compare=False)
    _phi_interp: PchipInterpolator = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        vals = np.asarray(self.log_g_values, dtype=float)
        if grid.ndim != 1 or grid.size < 16:
            raise DomainError("tabulated grid needs at least 16 points")
        if vals.shape != grid.shape:
            raise DomainError("grid and log_g_values must have matching length")
        if np.any(np.diff(grid) <= 0):
            raise DomainError("tabulated grid must be strictly increasing")
        if grid[0] < 0:
            raise DomainError("tabulated grid must start at a non-negative point")
        if grid[0] > _GRID_START_FRACTION * grid[-1]:
            raise DomainError("tabulated grid must start at or near 0")
        if not np.all(np.isfinite(vals)):
            raise DomainError("tabulated log g must be finite at every grid point")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "log_g_values", vals)

        slopes = np.empty_like(vals)
        slopes[1:-1] = (vals[2:] - vals[:-2]) / (grid[2:] - grid[:-2])
        slopes[0] = (vals[1] - vals[0]) / (grid[1] - grid[0])
        slopes[-1] = (vals[-1] - vals[-2]) / (grid[-1] - grid[-2])
        object.__setattr__(self, "_log_g_interp", PchipInterpolator(grid, vals))
        object.__setattr__(self, "_phi_interp", PchipInterpolator(grid, slopes))
        object.__setattr__(self, "_cache", {})

    @property
    def description(self):
        return self.label

    @property
    def domain(self):
        return float(self.grid[0]), float(self.grid[-1])

    def _check_range(self, t):
        t = np.asarray(t, dtype=float)
        lo, hi = self.domain
        if np.any(t < lo) or np.any(t > hi):
            raise GridRangeError(
                f"evaluation point outside tabulated grid [{lo:g}, {hi:g}]"
            )
        return t

    def log_g(self, t, dim):
        return self._log_g_interp(self._check_range(t))

    def phi(self, t, dim):
        return self._phi_interp(self._check_range(t))


def gaussian_generator():
    return GaussianGenerator()


def student_generator(dof):
    return StudentGenerator(dof=float(dof))


def tabulated_generator(grid, log_g_values, label="tabulated"):
    return TabulatedGenerator(grid=np.asarray(grid, dtype=float),
                              log_g_values=np.asarray(log_g_values, dtype=float),
                              label=label)


def _check_dim(dim):
    if int(dim) != dim or dim < 1:
        raise DomainError("dim must be a positive integer")
    return int(dim)


def eval_phi(gen, t, dim):
    """phi(t) = g'(t)/g(t) at ambient dimension ``dim``.

    Accepts a scalar or ndarray ``t >= 0``; the return matches the input
    shape. Gaussian gives the constant -1; Student gives
    ``-((d+dim)/d) (1 + t/d)^-1``.
    """
    dim = _check_dim(dim)
    arr = np.asarray(t, dtype=float)
    if np.any(arr < 0):
        raise DomainError("phi is only defined for t >= 0")
    out = gen.phi(arr, dim)
    return float(out) if np.isscalar(t) or arr.ndim == 0 else out


def log_delta(gen, dim, cfg=None):
    """log of the finite-moment integral delta = int_0^inf t^(dim-1) g(t) dt."""
    dim = _check_dim(dim)
    analytic = gen.analytic_log_delta(dim)
    if analytic is not None:
        return analytic
    cfg = cfg or DEFAULT_QUADRATURE
    cache = getattr(gen, "_cache", None)
    key = ("log_delta", dim, cfg)
    if cache is not None and key in cache:
        return cache[key]

    def integrand(q):
        q = np.asarray(q, dtype=float)
        lg = gen.log_g(q, dim)
        if dim == 1:
            return np.exp(lg)
        with np.errstate(divide="ignore"):
            return np.exp((dim - 1) * np.log(q) + lg)

    lo, hi = gen.domain
    if math.isinf(hi):
        value, _ = integrate_zero_to_inf(integrand, cfg)
    else:
        value, _ = integrate_adaptive(integrand, lo, hi, cfg)
    if not value > 0:
        raise GeneratorValidityError("finite-moment integral is not positive")
    out = math.log(value)
    if cache is not None:
        cache[key] = out
    return out


def modular_pdf(gen, dim, q, cfg=None):
    """Density of the modular variate: delta^{-1} q^(dim-1) g(q).

    Integrates to one over [0, inf); vectorized over ``q``.
    """
    dim = _check_dim(dim)
    arr = np.asarray(q, dtype=float)
    if np.any(arr < 0):
        raise DomainError("the modular variate is supported on q >= 0")
    ld = log_delta(gen, dim, cfg)
    lg = gen.log_g(arr, dim)
    if dim == 1:
        out = np.exp(lg - ld)
    else:
        with np.errstate(divide="ignore"):
            out = np.exp((dim - 1) * np.log(arr) + lg - ld)
    return float(out) if np.isscalar(q) or arr.ndim == 0 else out


def _phi2_weighted_integral(gen, dim, power, cfg):
    """int q^power phi(q)^2 pdf(q) dq with the pdf built in log space."""
    ld = log_delta(gen, dim, cfg)

    def integrand(q):
        q = np.asarray(q, dtype=float)
        phi = np.asarray(gen.phi(q, dim), dtype=float)
        with np.errstate(divide="ignore"):
            log_q = np.log(q)
        exponent = (dim - 1 + power) * log_q + gen.log_g(q, dim) - ld
        return phi * phi * np.exp(exponent)

    lo, hi = gen.domain
    if math.isinf(hi):
        return integrate_zero_to_inf(integrand, cfg)
    value, err = integrate_adaptive(integrand, lo, hi, cfg)
    _check_tabulated_tail(integrand, lo, hi, value, cfg)
    return value, err


def _check_tabulated_tail(integrand, lo, hi, value, cfg):
    """Crude decay check at a finite grid's ends against tail_cutoff_mass."""
    scale = max(abs(value), cfg.abs_tol)
    tail_hi = float(integrand(np.array([hi]))[0]) * hi
    tail_lo = float(integrand(np.array([max(lo, 1e-300)]))[0]) * max(lo, 0.0)
    if max(tail_hi, tail_lo) > cfg.tail_cutoff_mass * scale:
        raise GeneratorValidityError(
            "tabulated grid too short: integrand mass beyond the grid "
            f"estimated at {max(tail_hi, tail_lo):.3e}"
        )


def modular_moments(gen, dim, method="auto", cfg=None):
    """The moment pair (E[Q phi^2], E[Q^2 phi^2]) at ambient dimension ``dim``.

    ``method`` is "analytic" (Gaussian/Student closed forms), "quadrature"
    (adaptive integration against the modular density), or "auto" (analytic
    when available).
    """
    dim = _check_dim(dim)
    if method == "auto":
        method = "analytic" if gen.has_analytic_moments else "quadrature"
    if method == "analytic":
        if not gen.has_analytic_moments:
            raise ContractError(
                f"analytic moments requested for {gen.family} generator"
            )
        e1, e2 = gen.analytic_moments(dim)
        return ModularMoments(dim=dim, e_q_phi2=e1, e_q2_phi2=e2, method="analytic")
    if method != "quadrature":
        raise DomainError(f"unknown moments method {method!r}")
    cfg = cfg or DEFAULT_QUADRATURE
    e1, err1 = _phi2_weighted_integral(gen, dim, 1, cfg)
    e2, err2 = _phi2_weighted_integral(gen, dim, 2, cfg)
    return ModularMoments(
        dim=dim,
        e_q_phi2=e1,
        e_q2_phi2=e2,
        method="quadrature",
        est_abs_error=max(err1, err2),
    )


def first_moment_identity(gen, dim, cfg=None):
    """E[Q phi(Q)] by quadrature; equals -dim for every admissible generator.

    The identity comes from integrating by parts, which needs the boundary
    term ``q^dim g(q)`` to vanish at both ends. That holds by construction for
    the analytic families; for a tabulated generator it is checked numerically
    at the grid ends and a violation raises
    :class:`~ecfim.errors.GeneratorValidityError`.

    Useful as a generator self-test: a tabulation or custom grid that cannot
    reproduce -dim is not a valid density generator at that dimension.
    """
    dim = _check_dim(dim)
    cfg = cfg or DEFAULT_QUADRATURE
    ld = log_delta(gen, dim, cfg)
    lo, hi = gen.domain

    if not math.isinf(hi):
        for endpoint in (lo, hi):
            if endpoint <= 0:
                continue
            term = math.exp(
                dim * math.log(endpoint) + float(gen.log_g(endpoint, dim)) - ld
            )
            if term > _BOUNDARY_TERM_TOL * dim:
                raise GeneratorValidityError(
                    f"boundary term q^dim g(q) = {term:.3e} at q={endpoint:g} "
                    "does not vanish; the zero-mean-score identity fails"
                )

    def integrand(q):
        q = np.asarray(q, dtype=float)
        phi = np.asarray(gen.phi(q, dim), dtype=float)
        with np.errstate(divide="ignore"):
            log_q = np.log(q)
        return phi * np.exp(dim * log_q + gen.log_g(q, dim) - ld)

    if math.isinf(hi):
        value, _ = integrate_zero_to_inf(integrand, cfg)
    else:
        value, _ = integrate_adaptive(integrand, lo, hi, cfg)
    return value


def log_density_norm(gen, dim, cfg=None):
    """log of the EC density normalization constant at dimension ``dim``.

    Obtained by integrating the elliptical density against the modular one:
    log C = lgamma(dim) - dim log(pi) - log delta. Scores and information
    matrices never need it; it exists so full log-densities (and hence the
    Monte Carlo oracles' finite-difference checks) are exact.
    """
    dim = _check_dim(dim)
    return float(gammaln(dim)) - dim * math.log(math.pi) - log_delta(gen, dim, cfg)


def log_density_generator(gen, dim, eta, cfg=None):
    """Full log-density contribution log C + log g(eta) for quadratic form eta."""
    dim = _check_dim(dim)
    arr = np.asarray(eta, dtype=float)
    if np.any(arr < 0):
        raise DomainError("the quadratic form eta must be non-negative")
    out = log_density_norm(gen, dim, cfg) + gen.log_g(arr, dim)
    return float(out) if np.isscalar(eta) or arr.ndim == 0 else out
