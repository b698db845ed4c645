"""flocstab - stability analysis toolkit for the size-structured flocculation model"""

__version__ = "0.1.0"

from .model import Grid, RateSet, SizeDomain, build_preset, custom_rates, tabulate, validate_assumptions
from .steady_state import DensityField, SolverOptions, check_existence, multi_start, solve_fixed_point
from .linearization import assemble_matrix, build_coefficients, spectral_abscissa
from .criteria import nontrivial_verdict, zero_verdict
from .simulator import SimOptions, perturbation_experiment, run
from .validation import FlocstabError, ValidationError

__all__ = [
    "Grid", "RateSet", "SizeDomain", "build_preset", "custom_rates", "tabulate", "validate_assumptions",
    "DensityField", "SolverOptions", "check_existence", "multi_start", "solve_fixed_point",
    "assemble_matrix", "build_coefficients", "spectral_abscissa",
    "nontrivial_verdict", "zero_verdict",
    "SimOptions", "perturbation_experiment", "run",
    "FlocstabError", "ValidationError",
]
