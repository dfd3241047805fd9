"""Sparse matrix factorization via decomposition norms.

Closed-form shrinkage solvers for the trace-norm, row-norm and entrywise
penalties, a convex lower-bound solver for the mixed l1-l2 penalty with a
rank-deficiency global-optimality certificate, homotopy rounding back to an
explicit sparse factorization, an alternating-minimization baseline, and a
synthetic denoising benchmark harness.
"""

__version__ = "0.1.0"

from .altmin import AltMinConfig, AltMinSolution, noconv_solve, prox_squared_l1
from .benchmark import (
    ExperimentSpec,
    TrialRecord,
    generate_synthetic,
    report,
    run_config,
    run_trial,
    summarize,
    svd_baseline,
)
from .convex import (
    ConvexSolution,
    EstimationObjective,
    NormBoundObjective,
    SolverConfig,
    certify_global,
    grow_and_solve,
    norm_lower_bound,
    solve_estimation,
    solve_norm_bound,
)
from .linalg import (
    NotPositiveDefiniteError,
    RngStream,
    SvdResult,
    read_matrix,
    solve_spd,
    standard_normal_matrix,
    svd,
    write_matrix,
)
from .norms import (
    Factorization,
    IntractableDualError,
    NoClosedFormError,
    NormSpec,
    decomposition_norm,
    dual_norm,
    factorization_cost,
    l1_trace_penalty,
    l1_trace_penalty_smoothed,
    mixed_dual_lower_bound,
    mixed_norm_sq,
)
from .rounding import (
    HomotopySchedule,
    RoundedSolution,
    recover_norm_coefficients,
    round_estimation,
    round_norm_factorization,
)
from .shrinkage import entrywise_soft_threshold, row_group_threshold, svt
