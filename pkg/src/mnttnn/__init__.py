"""Multimode nonlinear transform tensor completion.

Dense order-3 tensor algebra, geometry-derived transform factors, a
proximal alternating solver for the nonconvex multimode completion
problem, convex transform-domain baselines, a stage-chained booster, and
an experiment harness with a CLI.
"""

from .chain import (
    ChainResult,
    ChainSpec,
    ChainStageError,
    StageSpec,
    default_chain,
    nttnn_config,
    run_chain,
    run_stage,
)
from .convex import ConvexConfig, ConvexReport, solve_convex_ttnn
from .graph_factors import (
    SpatialGraph,
    WaveletConfig,
    build_factor_set,
    build_spatial_graph,
    data_transform,
    gaussian_adjacency,
    normalized_laplacian,
    spatial_factor_g,
    spatiotemporal_factor_h,
    temporal_factor_t,
)
from .masks import MaskSpec, ObservationMask, gen_mask
from .metrics import mape, mape_with_counts, rmse
from .solver import (
    InfeasibleStateError,
    PamConfig,
    PamState,
    SolveReport,
    SubproblemError,
    SufficientDecreaseError,
    linear_interp_init,
    objective,
    solve_mnt_tnn,
    split_validation,
    update_c,
    update_factor_procrustes,
    update_x,
    update_z,
)
from .tensor_ops import (
    ModeSubset,
    as_tensor3,
    deterministic_svd,
    face_product,
    fold,
    mode_product,
    nuclear_norm,
    svt,
    ttnn_norm,
    unfold,
    vec_face_product,
)
from .transforms import (
    Activation,
    FactorSet,
    activation,
    adjoint_mnt_linear,
    apply_mnt,
    apply_mnt_linear,
    identity_factors,
    mnt_tnn_norm,
)

__version__ = "0.1.0"
