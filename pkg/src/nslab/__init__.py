"""Numerical laboratory for Newtonian dynamics in momentum representation.

The package evaluates the normality equations of such systems as
pointwise residuals, solves the Pfaff system for the shift-initialization
function nu, and simulates the normal shift of hypersurfaces along
trajectories, verifying orthogonality as it goes.
"""

from .connections import (
    CanonicalConnection,
    ConnectionField,
    CurvaturePair,
    ExplicitConnection,
    GaugedConnection,
    GaugeTensor,
    TensorField,
    ZeroConnection,
    canonical_connection,
    connection_from_config,
    covariant_derivative,
    curvatures,
    force_covector,
    gauge_transform,
    momentum_gradient,
    random_gauge_tensor,
)
from .dynamics import (
    ExtendedState,
    IntegratorConfig,
    Trajectory,
    WeakFieldBundle,
    deviation,
    integrate,
    integrate_family,
    phase_rhs,
    variational_rhs,
    weak_fields,
)
from .errors import (
    AsymmetricGauge,
    ConfigError,
    DegenerateOmega,
    EvaluationDomainError,
    ExpressionSyntaxError,
    NonFiniteState,
    NslabError,
    NuVanished,
    RankDeficientTangents,
    SingularMetric,
    UnknownIdentifierError,
    VariableIndexError,
    ZeroWv,
)
from .expressions import (
    Expression,
    Jet,
    derivative,
    evaluate,
    evaluate_jet,
    finite_difference_probe,
    parse,
    parse_expression,
    substitute,
)
from .normality import (
    ABCTensors,
    BatchReport,
    NormalityResidual,
    abc_tensors,
    additional_residuals,
    normality_report,
    residual_at,
    weak_residuals,
)
from .sampling import PointSampler
from .surfaces import (
    Hypersurface,
    NuGrid,
    OrthogonalityReport,
    ShiftRun,
    SurfaceFrame,
    compatibility_residual,
    load_surface,
    pfaff_rhs,
    simulate_shift,
    solve_nu,
    surface_frame,
    surface_from_config,
    verify_orthogonality,
)
from .systems import (
    DEFAULT_TOL,
    EuclideanNewtonianSystem,
    ExplicitSystem,
    KinematicFrame,
    ModifiedHamiltonianSystem,
    PhasePoint,
    RegularityReport,
    SystemDefinition,
    Tolerances,
    build_modified_hamiltonian,
    build_riemannian_euclidean,
    check_regularity,
    frame_at,
    load_system,
    phi_pullback,
    system_from_config,
)

__version__ = "0.1.0"
