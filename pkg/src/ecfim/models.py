"""Parametric mean/scatter models with exact or finite-difference derivatives.

A model maps a real parameter vector theta to per-snapshot complex means
``mu_t(theta)`` (columns of an M x T matrix) and a Hermitian positive-definite
M x M scatter ``Sigma(theta)``, together with all first derivatives. Three
built-in models cover the structurally distinct cases:

* ``ula-doa``   - uniform linear array, mean parameters (A, psi, omega)
                  disjoint from the scatter parameter sigma2; exercises both
                  information-matrix terms and the block-diagonal structure.
* ``ar1-scatter`` - zero mean, Toeplitz AR(1) scatter in (rho, sigma2); the
                  pure trace terms, where elliptical and Gaussian information
                  matrices are not proportional.
* ``scalar-mean`` - M = 1, mean theta_1, unit scatter; desk-checkable.

Models and evaluations are immutable; evaluation is pure and reentrant.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .constants import FD_DEFAULT_REL_STEP, HERMITIAN_ATOL
from .errors import BoundaryError, ContractError, DefinitenessError, DomainError


def _hermitize(mat):
    return 0.5 * (mat + mat.conj().T)


@dataclass(frozen=True)
class ParamVector:
    """Real parameter vector theta with per-entry labels."""

    values: np.ndarray
    names: tuple

    def __post_init__(self):
        vals = np.atleast_1d(np.asarray(self.values, dtype=float))
        if vals.ndim != 1 or vals.size < 1:
            raise DomainError("theta must be a 1-d vector with p >= 1")
        if not np.all(np.isfinite(vals)):
            raise DomainError("theta entries must be finite")
        names = tuple(str(n) for n in self.names)
        if len(names) != vals.size:
            raise ContractError("theta labels must match its length")
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "names", names)

    @property
    def p(self):
        return self.values.size


@dataclass(frozen=True)
class ModelEval:
    """A model evaluated at one theta: values and all first derivatives.

    ``means`` is M x T (columns mu_t), ``scatter`` M x M Hermitian PD,
    ``mean_jacobians`` p x M x T (entry j holds d mu_t / d theta_j stacked
    over t) and ``scatter_derivs`` p x M x M (entry j holds d Sigma / d
    theta_j, Hermitian).
    """

    means: np.ndarray
    scatter: np.ndarray
    mean_jacobians: np.ndarray
    scatter_derivs: np.ndarray

    def __post_init__(self):
        means = np.asarray(self.means, dtype=complex)
        scatter = np.asarray(self.scatter, dtype=complex)
        jacs = np.asarray(self.mean_jacobians, dtype=complex)
        derivs = np.asarray(self.scatter_derivs, dtype=complex)
        if means.ndim != 2:
            raise ContractError("means must be an M x T matrix")
        m, t = means.shape
        if scatter.shape != (m, m):
            raise ContractError("scatter must be M x M")
        if jacs.ndim != 3 or jacs.shape[1:] != (m, t):
            raise ContractError("mean_jacobians must be p x M x T")
        p = jacs.shape[0]
        if derivs.shape != (p, m, m):
            raise ContractError("scatter_derivs must be p x M x M")

        herm_gap = np.max(np.abs(scatter - scatter.conj().T))
        scale = max(np.max(np.abs(scatter)), 1.0)
        if herm_gap > HERMITIAN_ATOL * scale:
            raise DefinitenessError(f"scatter is not Hermitian (gap {herm_gap:.3e})")
        for j in range(p):
            gap = np.max(np.abs(derivs[j] - derivs[j].conj().T))
            dscale = max(np.max(np.abs(derivs[j])), 1.0)
            if gap > HERMITIAN_ATOL * dscale:
                raise DefinitenessError(
                    f"scatter derivative {j} is not Hermitian (gap {gap:.3e})"
                )
        smallest = float(np.linalg.eigvalsh(scatter)[0])
        if smallest <= 0:
            raise DefinitenessError(
                f"scatter is not positive definite (smallest eigenvalue {smallest:.3e})",
                smallest_eigenvalue=smallest,
            )
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "scatter", scatter)
        object.__setattr__(self, "mean_jacobians", jacs)
        object.__setattr__(self, "scatter_derivs", derivs)

    @property
    def M(self):
        return self.means.shape[0]

    @property
    def T(self):
        return self.means.shape[1]

    @property
    def p(self):
        return self.mean_jacobians.shape[0]


@dataclass(frozen=True, eq=False)
class ParametricModel:
    """theta -> (means, scatter) plus first derivatives.

    ``value_fn(theta_values)`` returns (means, scatter); ``deriv_fn`` returns
    (mean_jacobians, scatter_derivs) or is None, in which case central finite
    differences with relative step ``fd_rel_step`` supply the derivatives.
    ``domain_fn`` raises :class:`DomainError` naming the offending parameter.
    """

    name: str
    p: int
    M: int
    T: int
    param_names: tuple
    value_fn: Callable
    deriv_fn: Optional[Callable] = None
    domain_fn: Optional[Callable] = None
    derivative_mode: str = "analytic"
    fd_rel_step: float = FD_DEFAULT_REL_STEP

    def __post_init__(self):
        if self.derivative_mode not in ("analytic", "finite-difference"):
            raise DomainError(f"unknown derivative_mode {self.derivative_mode!r}")
        if self.derivative_mode == "analytic" and self.deriv_fn is None:
            raise ContractError("analytic derivative_mode requires deriv_fn")
        if len(self.param_names) != self.p:
            raise ContractError("param_names must have length p")

    def with_finite_difference(self, step=None):
        """A copy whose derivatives come from central differences."""
        return ParametricModel(
            name=self.name,
            p=self.p,
            M=self.M,
            T=self.T,
            param_names=self.param_names,
            value_fn=self.value_fn,
            deriv_fn=None,
            domain_fn=self.domain_fn,
            derivative_mode="finite-difference",
            fd_rel_step=self.fd_rel_step if step is None else float(step),
        )

    def param_vector(self, values):
        return ParamVector(values=np.asarray(values, dtype=float), names=self.param_names)


def _check_theta(model, theta):
    if isinstance(theta, ParamVector):
        vals = theta.values
    else:
        vals = np.atleast_1d(np.asarray(theta, dtype=float))
    if vals.size != model.p:
        raise ContractError(
            f"model {model.name!r} expects p={model.p} parameters, got {vals.size}"
        )
    if not np.all(np.isfinite(vals)):
        raise DomainError("theta entries must be finite")
    if model.domain_fn is not None:
        model.domain_fn(vals)
    return vals


def _fd_derivatives(model, vals, step):
    p = vals.size
    jacs = np.zeros((p, model.M, model.T), dtype=complex)
    derivs = np.zeros((p, model.M, model.M), dtype=complex)
    for j in range(p):
        h = step * max(1.0, abs(vals[j]))
        plus = vals.copy()
        minus = vals.copy()
        plus[j] += h
        minus[j] -= h
        if model.domain_fn is not None:
            try:
                model.domain_fn(plus)
                model.domain_fn(minus)
            except DomainError as exc:
                raise BoundaryError(
                    f"finite-difference step in {model.param_names[j]!r} leaves "
                    f"the parameter domain: {exc}"
                ) from exc
        means_p, scat_p = model.value_fn(plus)
        means_m, scat_m = model.value_fn(minus)
        jacs[j] = (np.asarray(means_p, dtype=complex) - np.asarray(means_m, dtype=complex)) / (2 * h)
        derivs[j] = (np.asarray(scat_p, dtype=complex) - np.asarray(scat_m, dtype=complex)) / (2 * h)
    return jacs, derivs


def evaluate_model(model, theta):
    """Evaluate means, scatter and all p derivative blocks at theta.

    The scatter and each scatter derivative are Hermitian-symmetrized before
    the :class:`ModelEval` invariants (Hermitian, positive definite) are
    enforced; a violation raises rather than returning a bad evaluation.
    """
    vals = _check_theta(model, theta)
    means, scatter = model.value_fn(vals)
    means = np.asarray(means, dtype=complex)
    scatter = _hermitize(np.asarray(scatter, dtype=complex))
    if model.derivative_mode == "analytic":
        jacs, derivs = model.deriv_fn(vals)
        jacs = np.asarray(jacs, dtype=complex)
        derivs = np.asarray(derivs, dtype=complex)
    else:
        jacs, derivs = _fd_derivatives(model, vals, model.fd_rel_step)
    derivs = np.stack([_hermitize(derivs[j]) for j in range(derivs.shape[0])])
    return ModelEval(
        means=means,
        scatter=scatter,
        mean_jacobians=jacs,
        scatter_derivs=derivs,
    )


def finite_diff_eval(model, theta, step=FD_DEFAULT_REL_STEP):
    """Central-difference evaluation regardless of the model's derivative mode.

    Step for coordinate j is ``step * max(1, |theta_j|)``; a step that
    collides with the domain boundary raises :class:`BoundaryError`.
    """
    if not step > 0:
        raise DomainError("step must be positive")
    vals = _check_theta(model, theta)
    means, scatter = model.value_fn(vals)
    jacs, derivs = _fd_derivatives(model, vals, step)
    derivs = np.stack([_hermitize(derivs[j]) for j in range(derivs.shape[0])])
    return ModelEval(
        means=np.asarray(means, dtype=complex),
        scatter=_hermitize(np.asarray(scatter, dtype=complex)),
        mean_jacobians=jacs,
        scatter_derivs=derivs,
    )


# ---------------------------------------------------------------------------
# built-in models
# ---------------------------------------------------------------------------


def _ula_doa(M, T):
    """mu_t = A e^{i psi} a(omega) with a(omega)_m = e^{i omega m}; Sigma = sigma2 I."""
    names = ("amplitude", "phase", "spatial_freq", "noise_var")
    idx = np.arange(M)

    def domain(vals):
        if not vals[0] > 0:
            raise DomainError("amplitude must be positive")
        if not vals[3] > 0:
            raise DomainError("noise_var must be positive")

    def value(vals):
        amp, psi, omega, noise = vals
        steer = np.exp(1j * omega * idx)
        col = amp * np.exp(1j * psi) * steer
        means = np.tile(col[:, None], (1, T))
        return means, noise * np.eye(M, dtype=complex)

    def deriv(vals):
        amp, psi, omega, noise = vals
        steer = np.exp(1j * omega * idx)
        col = amp * np.exp(1j * psi) * steer
        jacs = np.zeros((4, M, T), dtype=complex)
        jacs[0] = np.tile((np.exp(1j * psi) * steer)[:, None], (1, T))
        jacs[1] = np.tile((1j * col)[:, None], (1, T))
        jacs[2] = np.tile((1j * idx * col)[:, None], (1, T))
        derivs = np.zeros((4, M, M), dtype=complex)
        derivs[3] = np.eye(M, dtype=complex)
        return jacs, derivs

    return ParametricModel(
        name="ula-doa", p=4, M=M, T=T, param_names=names,
        value_fn=value, deriv_fn=deriv, domain_fn=domain,
    )


def _ar1_scatter(M, T):
    """mu_t = 0; Sigma_{mn} = sigma2 rho^{|m-n|} with real rho in (-1, 1)."""
    names = ("rho", "sigma2")
    lag = np.abs(np.subtract.outer(np.arange(M), np.arange(M)))

    def domain(vals):
        if not abs(vals[0]) < 1:
            raise DomainError("rho must satisfy |rho| < 1")
        if not vals[1] > 0:
            raise DomainError("sigma2 must be positive")

    def value(vals):
        rho, sigma2 = vals
        return np.zeros((M, T), dtype=complex), (sigma2 * rho**lag).astype(complex)

    def deriv(vals):
        rho, sigma2 = vals
        # d rho^k / d rho = k rho^(k-1); the k = 0 diagonal is constant in rho
        dpow = np.where(lag == 0, 0.0, lag * rho ** np.maximum(lag - 1, 0))
        jacs = np.zeros((2, M, T), dtype=complex)
        derivs = np.zeros((2, M, M), dtype=complex)
        derivs[0] = (sigma2 * dpow).astype(complex)
        derivs[1] = (rho**lag).astype(complex)
        return jacs, derivs

    return ParametricModel(
        name="ar1-scatter", p=2, M=M, T=T, param_names=names,
        value_fn=value, deriv_fn=deriv, domain_fn=domain,
    )


def _scalar_mean(M, T):
    """M = 1, mu_t = theta_1 (real), Sigma = 1 fixed."""
    if M != 1:
        raise DomainError("scalar-mean is defined only for M = 1")
    names = ("mean",)

    def value(vals):
        return np.full((1, T), vals[0], dtype=complex), np.eye(1, dtype=complex)

    def deriv(vals):
        return np.ones((1, 1, T), dtype=complex), np.zeros((1, 1, 1), dtype=complex)

    return ParametricModel(
        name="scalar-mean", p=1, M=1, T=T, param_names=names,
        value_fn=value, deriv_fn=deriv, domain_fn=None,
    )


_BUILTIN_FACTORIES = {
    "ula-doa": (_ula_doa, 4, 8),
    "ar1-scatter": (_ar1_scatter, 3, 4),
    "scalar-mean": (_scalar_mean, 1, 5),
}


def builtin_model(name, M=None, T=None):
    """Construct a built-in model by name with the given dimensions."""
    try:
        factory, default_m, default_t = _BUILTIN_FACTORIES[name]
    except KeyError:
        raise DomainError(
            f"unknown model {name!r}; available: {sorted(_BUILTIN_FACTORIES)}"
        ) from None
    return factory(default_m if M is None else int(M), default_t if T is None else int(T))


def builtin_model_names():
    return sorted(_BUILTIN_FACTORIES)
