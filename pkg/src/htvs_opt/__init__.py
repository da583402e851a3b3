"""Optimal threshold policies for multi-stage virtual-screening pipelines.

Estimate the joint score distribution of a screening cascade as a Gaussian
mixture, evaluate detection probability and expected cost for any threshold
policy by quasi-Monte-Carlo orthant integration, search for the best policy
under a compute budget or a throughput/cost tradeoff, and verify the result
by simulating the cascade over realized score tables.
"""

from .configs import EmConfig, IntegrationConfig, OptConfig
from .errors import (
    BadDimension,
    ColumnMissing,
    DegenerateCovariance,
    DuplicateColumn,
    EmptyTable,
    LengthMismatch,
    NoLabels,
    NonFiniteInput,
    NonFiniteScore,
    NonFiniteThreshold,
    NotPositiveDefinite,
    ParseError,
    ScreeningError,
    TooFewSamples,
    ZeroTail,
)
from .gmm import (
    GmmComponent,
    GmmModel,
    fit_gmm,
    log_likelihood,
    marginal_cdf,
    marginal_ppf,
    marginalize,
    sample,
    select_components,
)
from .objective import (
    ObjectiveReport,
    PipelineSpec,
    Policy,
    Stage,
    expected_stage_counts,
    expected_total_cost,
    final_tail,
    joint_objective,
    normalized_cost,
    relative_reward,
    reward,
)
from .orthant import OrthantQuery, upper_orthant_prob
from .optimizer import (
    BudgetCurve,
    BudgetPoint,
    BudgetSpec,
    OptimizationResult,
    baseline_thresholds,
    budget_sweep,
    optimize_budgeted,
    optimize_joint,
)
from .simulator import (
    Metrics,
    SimReport,
    attach_empirical,
    classification_metrics,
    run_baseline,
    run_policy,
)
from .synthetic import generate_synthetic, synthetic_model, toeplitz_covariance
from .tables import ScoreTable

__version__ = "0.1.0"
