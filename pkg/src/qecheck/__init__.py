"""qecheck: numerical curvature engine and obstruction tests for
quasi-Einstein structure on smooth metric measure spaces."""

__version__ = "0.1.0"

from .errors import (  # noqa: F401
    EvalDomainError,
    ExcludedDimensionError,
    ExprSyntaxError,
    InputError,
    NotPositiveDefiniteError,
    NotWeaklyGenericError,
    QecheckError,
    ScaleMismatchError,
    UnknownSymbolError,
)
from .expr import ScalarExpr, eval_jet, parse_scalar  # noqa: F401
from .jets import Jet  # noqa: F401
from .manifold import ManifoldFile, compile_spec, parse_manifold, sample_points  # noqa: F401
from .smms import (  # noqa: F401
    CurvaturePack,
    SmmsJet,
    SmmsSpec,
    bakry_emery,
    conformal_change,
    dual_smms,
    evaluate,
    qe_residual,
    verify_identities,
    weighted_bach,
    weighted_curvature,
)
from .riemann import (  # noqa: F401
    MetricJet,
    TensorValue,
    covariant_derivative,
    kulkarni_nomizu,
    metric_jet,
    ricci_scalar_schouten,
    riemann_tensor,
    weighted_divergence,
)
from .tractor import (  # noqa: F401
    AdjointTractor,
    KFormTractor,
    Tractor,
    TractorCurvature,
    WeylTractor,
    annihilation_check,
    check_parallel_correspondence,
    kform_connection,
    kform_contract,
    kform_inner,
    scale_tractor,
    tractor_curvature,
    tractor_inner,
    transform,
    w_connection,
    w_tractor_D,
    weighted_weyl,
)
from .obstruction import (  # noqa: F401
    GenericityReport,
    build_D,
    candidate_K,
    check_tractor_conditions,
    genericity,
    harnack_form_matrix,
    harnack_value,
    obstruction_G_point,
    potential_reconstruct,
    rank_test_phi,
    soliton_point,
    soliton_residual_point,
    static_point,
    static_residual_point,
)
from .pipelines import run_check, run_harnack, run_potential, run_verify  # noqa: F401
