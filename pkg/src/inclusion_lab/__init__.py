"""Regularizations, generalized derivatives, certification and simulation for
switched nonsmooth dynamical systems."""
from .fields import (
    CoverageError,
    NullSetError,
    Piece,
    PiecewiseField,
    SmoothField,
    SwitchedField,
    SwitchingError,
    SwitchingSignal,
    analytic_regularization,
    assemble_switched,
    assumption_probe,
    containment_check,
    filippov_estimate,
    krasovskii_estimate,
)
from .hull import (
    ConvexWeights,
    DomainError,
    NotInHullError,
    Polytope,
    caratheodory_reduce,
    contains,
    hausdorff,
    hull_subset,
    min_of_convex_max,
    support,
    union_hull,
)
from .lyap import (
    CertificationReport,
    ReducedDerivative,
    certify,
    gen_deriv_lower,
    gen_deriv_reduced,
    gen_deriv_upper,
    parse_grid,
    rectangular_grid,
    reduce_inclusion,
    sample_derivatives,
)
from .nonsmooth import LyapunovCandidate, check_bounds, clarke_gradient, linf_norm_candidate, quadratic_candidate
from .scenarios import Scenario, scenario
from .sim import (
    DegenerateSlidingError,
    FiniteEscapeError,
    ModalField,
    SelectionRule,
    SwitchingSurface,
    Trajectory,
    integrate,
    monitor,
)

__version__ = "0.1.0"
