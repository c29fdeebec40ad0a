"""Near-optimal structured-matrix approximation from matrix-vector queries."""
from .family import (
    CandidateSet,
    DenseMember,
    FiniteFamily,
    PatternMember,
    Rank1Member,
    brute_force_opt,
    member_sketch,
    sample_without_replacement,
    true_error,
)
from .instances import gen_butterfly_block_family, gen_planted, gen_wishart
from .linearfam import (
    BallCover,
    CoverFamily,
    LinearFamily,
    build_ball_cover,
    covering_approx,
    least_squares_projection,
    linear_family_approx,
    orthonormalize,
)
from .oracle import QueryLedger, QueryOracle, ShapeError, reveal
from .refine import (
    ApproxResult,
    ParamSet,
    RefineConfig,
    binary_search_approx,
    coarse_opt_bound,
    derive_params,
    one_shot_argmin,
    one_sided_refine,
    two_sided_refine,
    vmv_family_argmin,
)
from .sketch import (
    SketchMatrix,
    VmvEstimatorParams,
    gaussian_sketch,
    rademacher_sketch,
    sketched_distance,
    vmv_norm_estimate,
)

__version__ = "0.1.0"
