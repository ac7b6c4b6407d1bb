"""Numerical toolkit for step-2 Carnot groups.

Group algebra from structure constants, homogeneous metrics, horizontal
calculus, H-perimeter quadrature over parameterized hypersurfaces,
pointwise geometric-measure-theory probes (densities, approximate
limits, traces, blow-ups), BV functionals, and the boundary-perimeter
admissibility experiments, driven by a small scene-file CLI.
"""
from .groups import (
    GroupSpec,
    ValidationReport,
    bracket,
    bracket_adjoint,
    bracket_adjoint_matrix,
    dilate,
    dilation_jacobian,
    frame,
    free_step2_group,
    group_from_entries,
    heisenberg_group,
    inverse,
    is_heisenberg_type,
    multiply,
    quaternion_htype_group,
    validate_spec,
)
from .metrics import (
    BallSpec,
    ball_diameter_estimate,
    ball_volume,
    ball_volume_exact,
    box_norm,
    dist_box,
    dist_gauge,
    equivalence_interval,
    gauge_norm,
    theta_candidates,
    triangle_violation,
    unit_ball_volume,
)
from .hcalc import (
    HorizontalSection,
    ScalarField,
    frame_pairing,
    horizontal_divergence,
    horizontal_gradient,
    horizontal_gradient_split,
    swirl_field,
)
from .geometry import (
    CharacteristicPointError,
    Domain,
    HalfSpaceH,
    ScanReport,
    SurfacePatch,
    characteristic_scan,
    coordinate_plane_patch,
    cylinder_patch,
    dilate_domain,
    dilate_patch,
    disk_patch,
    gauge_sphere_patch,
    graph_patch,
    h_perimeter,
    halfspace_side,
    halfspace_value,
    horizontal_normal,
    implicit_graph_patch,
    perimeter_density,
    revolution_graph_patch,
    translate_domain,
    translate_patch,
)
from .gmt import (
    ApproxLimits,
    BlowupProfile,
    DensityProfile,
    TraceResult,
    approx_limits,
    averaged_normal,
    blowup_profile,
    default_radii,
    density,
    trace_at,
    zero_extension,
)
from .variation import (
    CoareaReport,
    GaussGreenReport,
    PiReport,
    PlateauBump,
    VariationReport,
    VolumeRegion,
    box_region,
    coarea_check,
    cylinder_region,
    gauge_ball_region,
    gauss_green_residual,
    pi_report,
    var_h,
    volume_integrate,
)
from .admissibility import (
    NonCharacteristicReport,
    RatioResult,
    SweepResult,
    SweepRow,
    SymmetryBoundReport,
    admissibility_ratio,
    cap_domain,
    cap_patches,
    counterexample_sweep,
    f_integral,
    noncharacteristic_bound,
    partial_symmetry_bound,
)
from .expressions import (
    ExpressionError,
    differentiate,
    expression_field,
    parse_expression,
    to_source,
)
from .scene import SceneConfig, SceneError, load_scene, parse_scene_text
from .quad import MeasureEstimate

__version__ = "0.1.0"
