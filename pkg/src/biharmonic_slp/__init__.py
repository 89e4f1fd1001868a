"""Biharmonic single-layer potential on smooth plane curves.

Nystrom discretisation of the single-layer trace operator, the 3x3 Robin
matrix of the exterior boundary and the degenerate scales at which the
operator fails to be invertible.
"""

from .assembly import (
    BorderedSystem,
    DiscreteDensity,
    DiscreteOperatorV,
    Discretization,
    FarFieldExpansion,
    TracePair,
    assemble_V,
    build_bordered,
    eval_field,
    far_field_fit,
    moment_vector,
    solve_trace,
    solve_V,
)
from .errors import (
    BiharmonicError,
    ConvergenceError,
    DegenerateScaleError,
    FitError,
    GeometryError,
    LinearAlgebraError,
    NearBoundaryError,
    SingularEvaluationError,
)
from .geometry import (
    CurveSample,
    MultiCurve,
    ParamCurve,
    bounding_radii,
    classify_exterior,
    make_multicurve,
    multicurve_from_spec,
    parse_curve_spec,
    sample,
    scale_about_origin,
)
from .kernels import DEFAULT_PARAMS, KernelParams, circle_closed_forms
from .robin import (
    RobinMatrix,
    SDagger,
    bracket_vector,
    check_criteria,
    classify,
    robin_matrix,
    sdagger_trace_residual,
)
from .scales import (
    ScaleScanResult,
    find_degenerate_scales,
    locate_sigma_dips,
    scan_eigenvalues,
    sigma_min_scan,
)

__version__ = "0.1.0"
