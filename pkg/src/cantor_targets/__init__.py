"""Shrinking targets for Q-Cantor series maps: exact expansions, hit tests,
dimension estimates and finite cover-tree checks."""

from .covertree import (
    CoverTree,
    LevelSchedule,
    ball_mass,
    build_cover,
    choose_levels,
    counting_inequality_check,
    cylinder_estimate_check,
    export_tree,
    frostman_check,
    hausdorff_sum,
    mass_conservation_check,
    nesting_check,
    upper_bound_series_check,
)
from .dimension import (
    ExponentialFamily,
    PeriodicFamily,
    PolynomialFamily,
    bowen_parameter,
    corollary_limit,
    dimension_limsup,
    family_formula,
    parse_family,
    pressure_estimate,
    stolz_check,
)
from .errors import (
    CantorTargetsError,
    CapExceeded,
    DomainError,
    InvalidDigit,
    NotQAdic,
    ParseError,
    PreconditionUnmet,
    ScheduleInfeasible,
    UnsupportedFamily,
)
from .expansion import cantor_digits, iterate, nearest_qadic, reconstruct, to_point
from .logreal import LogReal
from .sequences import CumulativeCache, parse_sequence_spec
from .targets import Verdict, height, hit_levels, hit_test, psi, witness_search

__version__ = "0.1.0"
