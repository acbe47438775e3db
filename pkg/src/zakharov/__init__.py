"""Variational solver for the stationary Zakharov equation on boxes."""

__version__ = "0.1.0"

from .grids import DomainSpec, Field, OperatorSet, build_operators, gradient_field, integrate, measure  # noqa: F401
from .spectrum import EigenPair, Spectrum, solve_spectrum, rayleigh_quotient  # noqa: F401
from .energy import (  # noqa: F401
    ModelParams,
    FiberingResult,
    energy,
    gradient,
    hess_vec,
    hess_matrix,
    nehari_residual,
    fibering_project,
    energy_identity_gap,
    dilate,
)
from .solvers import (  # noqa: F401
    SolverCfg,
    SolveReport,
    DeflationSet,
    BelowThresholdError,
    mountain_pass_solve,
    nehari_descent,
    newton_deflated,
    multiplicity_search,
    global_minimize_e2,
    nonexistence_certificate,
    morse_index,
)
