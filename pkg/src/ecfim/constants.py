"""Numeric tolerances used across the library and its test suites.

Single source of truth: tests import these instead of re-declaring
magic numbers.
"""

# Hermitian / symmetry checks on matrices handed around the library.
HERMITIAN_ATOL = 1e-12
SYMMETRY_RTOL = 1e-10

# Positive-semidefiniteness slack for assembled information matrices:
# eigenvalues must satisfy lam >= -PSD_SLACK * lam_max.
PSD_SLACK = 1e-8

# Agreement gates for closed-form identities.
GAUSS_REDUCTION_RTOL = 1e-10      # EMS/EVS with Gaussian moments vs Slepian-Bangs
STUDENT_LIMIT_RTOL = 1e-5         # Student dof -> infinity vs Gaussian
MOMENT_QUADRATURE_RTOL = 1e-8     # quadrature moments vs analytic moments
FIRST_MOMENT_ATOL = 1e-8          # E[Q phi(Q)] + dim
PDF_UNIT_MASS_ATOL = 1e-10        # integral of the modular pdf vs 1

# Derivative checking.
FD_DEFAULT_REL_STEP = 1e-6
FD_AGREEMENT_RTOL = 1e-6          # finite-difference vs analytic Jacobians
SCORE_FD_RTOL = 1e-5              # analytic score vs log-likelihood gradient

# Monte Carlo gates.
MC_SIGMA_GATE = 4.0               # |estimate - truth| <= gate * stderr
MC_MIN_TRIALS = 1000
MC_INCONCLUSIVE_FRACTION = 0.2    # stderr above this fraction of |entry| -> inconclusive
KS_ALPHA = 0.01

# CRB computation.
CRB_MAX_CONDITION = 1e12
