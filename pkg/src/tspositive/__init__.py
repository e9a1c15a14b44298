"""Positive linear systems on time scales.

Positivity certificates, uniform exponential stability tests and single-input
positive stabilization for ``x^Delta = A x + B u`` on a time scale, plus exact
simulation.
"""

from .errors import (
    DataError,
    DomainError,
    NumericalError,
    ParseError,
    PreconditionError,
    TSPositiveError,
    ValidationError,
)
from .linalg import char_poly, expm, matrix_rank, poly_roots, spectral_abscissa, spectral_radius, spectrum
from .positivity import PositiveSystem, check_positive_system, is_metzler, metzler_offset
from .simulate import decay_fit, simulate, simulate_feedback, transition_decay, transition_matrix
from .stability import Verdict, assess_stability, coefficient_test, disc_membership
from .stabilize import (
    Status,
    alpha_bounds,
    build_constraints,
    control_decomposition,
    pbh_stabilizable,
    positive_stabilize,
    solve_feasibility,
    verify_closed_loop,
)
from .timescale import (
    Continuous,
    DenseInterval,
    ExplicitAtoms,
    Geometric,
    IsolatedPoint,
    PeriodicPattern,
    TimeScale,
    UniformGrid,
    delta_derivative,
    delta_integral,
    jump_data,
    make_timescale,
)

__version__ = "0.1.0"
