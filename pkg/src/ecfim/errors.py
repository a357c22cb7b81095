"""Exception hierarchy for the library."""


class EcFimError(Exception):
    """Base class for all library-specific errors."""


class DomainError(EcFimError, ValueError):
    """An argument is outside the mathematical domain of an operation."""


class GridRangeError(DomainError):
    """Evaluation point lies outside a tabulated generator's grid."""


class BoundaryError(DomainError):
    """A finite-difference step would leave the model's parameter domain."""


class GeneratorValidityError(EcFimError):
    """A density generator violates a required integrability/boundary condition."""


class QuadratureError(EcFimError):
    """Adaptive quadrature did not converge to the requested tolerance."""


class ContractError(EcFimError, ValueError):
    """Inputs are individually valid but mutually inconsistent (dimension mismatch)."""


class DefinitenessError(EcFimError):
    """A matrix required to be positive definite is not."""

    def __init__(self, message, smallest_eigenvalue=None):
        super().__init__(message)
        self.smallest_eigenvalue = smallest_eigenvalue


class SingularFimError(EcFimError):
    """FIM is singular or too ill-conditioned to invert into a CRB."""

    def __init__(self, message, condition_estimate=None):
        super().__init__(message)
        self.condition_estimate = condition_estimate


class SamplerConstructionError(EcFimError):
    """Building a sampler (e.g. an inverse-CDF table) failed to converge."""


class ConfigError(EcFimError):
    """Invalid run configuration (CLI)."""
