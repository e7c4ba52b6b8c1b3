"""Loewner-flow jets, Schiffer and maximum-principle checks for coefficient problems."""

__version__ = "0.1.0"

from .controls import (
    BoundaryAtom,
    ControlValue1,
    ControlValueN,
    DrivingControl,
    ball_grid,
    builtin_control,
    control_jet,
    extreme_point,
    koebe_control,
    project_to_un,
    random_control,
    random_poly_control,
    rotating_control,
    slit_control,
    validate_un,
)
from .errors import (
    LoewnerError,
    NumericalGuardError,
    PreconditionError,
    ValidationError,
)
from .jets import Jet, JetN, LaurentJet, koebe_jet
from .loewner import cross_check, integrate, integrate_pointwise, limit_map
from .optimize import OptimizeProblem, optimize, sample_reachable, teichmueller_experiment
from .pontryagin import adjoint_state, eval_Lt, maximize_Lt, pmp_check
from .schiffer import schiffer_residual
