"""Coreset construction and two-stage sampling for overconstrained
lp regression, p in [1, inf).

Pipeline: build a well-conditioned basis for span(A) (QR + ellipsoidal
rounding), sample rows by basis leverage (constant-factor stage), then
resample by the stage-1 residual (relative-error stage).  The realized
stage-2 rows form a coreset: re-solving on them reproduces the reported
solution.
"""
from .conditioning import (
    RoundingResult,
    WellConditionedBasis,
    certify_basis,
    lowner_john_round,
    spanner_coefficients,
    well_conditioned_basis,
)
from .errors import (
    InvalidConfigError,
    InvalidExponentError,
    MatrixParseError,
    StageFailureError,
    ZeroRankError,
)
from .kernels import BACKEND as KERNEL_BACKEND
from .linalg import (
    QRFactors,
    dual_exponent,
    mat_entrywise_p_norm,
    numeric_rank,
    qr_thin,
    vec_p_norm,
)
from .pipeline import (
    RegressionInstance,
    SolveReport,
    StageOutcome,
    derive_seed,
    generalized_two_stage,
    guarantee_statistics,
    make_instance_arrays,
    reference_instance,
    single_stage_augmented_solve,
    single_stage_oracle_solve,
    stage_one,
    stage_two,
    two_stage_solve,
    weighted_two_stage,
)
from .sampling import (
    SamplerConfig,
    SamplingPlan,
    apply_plan,
    measure_distortion,
    oracle_probabilities,
    r1_default,
    r2_default,
    realize_sample,
    stage1_probabilities,
    stage2_probabilities,
    weighted_stage1_probabilities,
)
from .solver import (
    SolveResult,
    SolverOptions,
    objective_gradient_check,
    solve_constrained,
    solve_lp_regression,
    solve_multi_rhs,
    solve_weighted,
)

__version__ = "0.1.0"
