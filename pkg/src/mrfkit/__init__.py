"""Minimum restraint functions: HJB construction, verification and synthesis."""

from .comparators import BracketPair, ComparatorPair, MonotoneTable, make_comparators
from .config import parse_config
from .converse import (
    ConverseParams,
    build_bilateral_sequence,
    build_ell1,
    build_ell_sequence,
    build_mrf,
    build_Phi_Psi,
    estimate_uniform_times,
    evaluate_J,
    kappa,
    strip_index,
)
from .core import ControlSystem, Trajectory, integrate_trajectory
from .grid import Grid, GridField, interpolate
from .hjb import SolverParams, solve_min_time, solve_value_function, supersolution_residual
from .kl import KLFunction
from .pipeline import run_pipeline
from .synthesis import (
    SynthesisParams,
    build_descent_rate,
    check_superoptimality,
    synthesize_level_halving,
)
from .systems import make_system
from .verify import (
    MrfCertificate,
    check_decrease,
    check_integrability,
    check_structure,
    compute_brackets,
    petrov_min_time_bound,
)

__version__ = "0.1.0"
