"""Numerical laboratory for the one-phase free boundary problem on cones.

Constructs the symmetric one-homogeneous solution on the cone
x4 = c |x| in R^4, classifies its stability, locates the critical slope
by bisection, minimizes the positivity-penalized Dirichlet energy on
axisymmetric grids, audits the scale-invariant boundary-energy monitor,
and certifies explicit sub- and supersolution barriers.
"""

from .errors import (
    ConvergenceFailureError,
    GridMismatchError,
    InvalidBracketError,
    InvalidParameterError,
    InvalidTestFunctionError,
    NoZeroError,
    PoleCollisionError,
    PoleDegeneracyError,
    PropertyViolationError,
    VertexSingularityError,
)
from .geometry import (
    CapGeometry,
    ConeParam,
    cap_geometry,
    homogeneity_exponent,
    is_minimizing,
    metric_cartesian,
    metric_spherical,
    morgan_threshold,
)
from .ode import (
    RadialProfile,
    SymmetricSolution,
    beta_half_profile,
    first_zero,
    integrate_profile,
    log_derivative_ordering,
    symmetric_solution,
)
from .stability import (
    ConnectivityReport,
    SmoothBump,
    StabilityReport,
    connectivity_bound_check,
    find_critical_c0,
    radial_instability_witness,
    second_variation_deficit,
    stability_margin,
    steklov_min_quotient,
    steklov_trial_quotient,
)
from .grid import (
    AxisymField,
    apply_laplace_beltrami,
    dirichlet_solve,
    field_from_solution,
    field_to_csv,
    gradient_c,
    gradient_sq_field,
    load_field_text,
    make_field,
    save_field_text,
)
from .minimize import (
    MinimizeConfig,
    MinimizeResult,
    compare_to_symmetric,
    energy,
    free_boundary_angle,
    minimize,
)
from .weiss import WeissTrace, rescale_field, weiss, weiss_trace
from .barriers import (
    BarrierConfig,
    BarrierReport,
    LiftReport,
    admissible_parameter_search,
    audit_pair,
    decomposition_terms,
    derivative_decomposition,
    gradient_on_zero_set,
    hessian_gradient_inequality,
    laplacian_sign_audit,
    subharmonicity_margin,
    supersolution_lift_check,
)

__version__ = "0.1.0"
