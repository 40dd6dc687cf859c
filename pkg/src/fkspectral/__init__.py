"""Spectral analysis and Monte Carlo simulation of branching diffusions with a Feynman-Kac potential."""

__version__ = "0.1.0"

from .grid import Grid
from .model import (
    AssumptionReport,
    AssumptionViolation,
    ModelFileError,
    ModelSpec,
    ReducedSpec,
    load_model,
    reduce,
    reduce_sigma,
    validate_assumptions,
)
from .spectral import NearDegenerateError, SpectralBasis, load_basis, solve_eigen
from .semigroup import ConsistencyError, KernelEvaluator, OutOfSupportError, TruncationWarning
from .qsd import QsdMeasure, build_qsd
from .qprocess import QProcessModel, build_q_model, simulate_q
from .branching import (
    EmptySampleError,
    NumericalError,
    PopulationTree,
    estimate_linear_functional,
    estimate_mass,
    reversed_spine_transition_check,
    simulate_population,
)
from .hermite import HermiteModel
