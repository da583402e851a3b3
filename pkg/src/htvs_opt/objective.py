"""Analytic screening-policy quantities for a pipeline and score model.

Evaluates, for a threshold policy: the probability that a random candidate
survives every stage including the fixed final cut (reward), the expected
number of candidates entering each stage, the expected total screening cost,
the fraction of final-stage qualifiers lost to upstream cuts (relative
reward), a cost normalized to (0, 1], and their weighted combination.

Expected counts and cost come from one sequential-conditioning QMC pass in
pipeline order (so the per-stage counts are exactly non-increasing), while
the reward integrates in canonical most-restrictive-first order: the rare
final-stage cut is conditioned on first, which keeps the estimate sharp at
deep tails, bounded by the exact final-stage tail, and invariant to the
ordering of the non-final stages. Both passes share one integration seed so
nearby policy evaluations stay smoothly comparable (common random numbers).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .configs import IntegrationConfig
from .errors import BadDimension, LengthMismatch, ZeroTail
from .gmm import GmmModel
from .orthant import OrthantQuery, chain_prefix_replicates, upper_orthant_prob

_TAIL_FLOOR = 1e-12


@dataclass(frozen=True)
class Stage:
    """One screening filter: a score column, a per-candidate cost, a name."""

    name: str
    cost: float
    column: int

    def __post_init__(self):
        if self.cost <= 0:
            raise ValueError(f"stage {self.name!r}: cost must be > 0")
        if self.column < 0:
            raise ValueError(f"stage {self.name!r}: column must be >= 0")


@dataclass(frozen=True)
class PipelineSpec:
    """Ordered stages plus the fixed final threshold and population size."""

    stages: tuple[Stage, ...]
    final_threshold: float
    population: int

    def __post_init__(self):
        stages = tuple(self.stages)
        if len(stages) < 2:
            raise ValueError("a pipeline needs at least 2 stages")
        cols = [s.column for s in stages]
        if len(set(cols)) != len(cols):
            raise ValueError(f"stage columns must be distinct, got {cols}")
        if self.population < 1:
            raise ValueError("population must be >= 1")
        if np.isnan(self.final_threshold):
            raise ValueError("final_threshold must not be NaN")
        object.__setattr__(self, "stages", stages)

    @property
    def n_stages(self) -> int:
        return len(self.stages)

    @property
    def columns(self) -> tuple[int, ...]:
        return tuple(s.column for s in self.stages)

    @property
    def costs(self) -> np.ndarray:
        return np.array([s.cost for s in self.stages])

    @property
    def final_stage(self) -> Stage:
        return self.stages[-1]


@dataclass(frozen=True)
class Policy:
    """Thresholds for the non-final stages; -inf passes everything."""

    thresholds: tuple[float, ...]

    def __post_init__(self):
        t = tuple(float(v) for v in self.thresholds)
        if any(np.isnan(v) for v in t):
            raise ValueError("policy thresholds must not be NaN")
        object.__setattr__(self, "thresholds", t)

    def __len__(self) -> int:
        return len(self.thresholds)

    @staticmethod
    def all_open(n_stages: int) -> "Policy":
        return Policy((-np.inf,) * (n_stages - 1))


@dataclass(frozen=True)
class ObjectiveReport:
    reward: float
    expected_counts: tuple[float, ...]
    expected_total_cost: float
    relative_reward: float
    normalized_cost: float
    joint_value: float

    def to_json_dict(self) -> dict:
        return {
            "reward": self.reward,
            "expected_counts": list(self.expected_counts),
            "expected_total_cost": self.expected_total_cost,
            "relative_reward": self.relative_reward,
            "normalized_cost": self.normalized_cost,
            "joint_value": self.joint_value,
        }


@dataclass(frozen=True)
class PolicyEvaluation:
    """One full evaluation pass plus replicate-based error estimates."""

    report: ObjectiveReport
    reward_se: float
    cost_se: float


def _check_policy(spec: PipelineSpec, policy: Policy) -> None:
    if len(policy) != spec.n_stages - 1:
        raise LengthMismatch(
            f"policy has {len(policy)} thresholds, pipeline needs {spec.n_stages - 1}"
        )


def _check_columns(model: GmmModel, spec: PipelineSpec) -> None:
    bad = [c for c in spec.columns if c < 0 or c >= model.dim]
    if bad:
        raise BadDimension(f"stage columns {bad} outside model dimension {model.dim}")


def final_tail(model: GmmModel, spec: PipelineSpec) -> float:
    """Exact marginal survival of the final threshold: P[y_N >= lambda_N]."""
    _check_columns(model, spec)
    col = spec.final_stage.column
    lam = spec.final_threshold
    if lam == -np.inf:
        return 1.0
    if lam == np.inf:
        return 0.0
    total = 0.0
    for c in model.components:
        sd = np.sqrt(c.covariance[col, col])
        total += c.weight * (1.0 - ndtr((lam - c.mean[col]) / sd))
    return float(min(max(total, 0.0), 1.0))


def evaluate_policy(
    model: GmmModel,
    spec: PipelineSpec,
    policy: Policy,
    alpha: float,
    integ: IntegrationConfig = IntegrationConfig(),
) -> PolicyEvaluation:
    """Evaluate every objective quantity in one integration pass."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must be in [0, 1], got {alpha}")
    _check_policy(spec, policy)
    _check_columns(model, spec)

    n = spec.n_stages
    pop = spec.population
    costs = spec.costs
    reps = chain_prefix_replicates(
        model, spec.columns[: n - 1], policy.thresholds, integ
    )
    n_rand = reps.shape[0]

    survival = reps.mean(axis=0)  # prefix survival probabilities, length n
    counts = pop * survival
    cost_reps = pop * (reps @ costs)
    total_cost = float(pop * (survival @ costs))
    cost_se = (
        float(np.std(cost_reps, ddof=1) / np.sqrt(n_rand)) if n_rand > 1 else 0.0
    )

    tail = final_tail(model, spec)
    if tail < _TAIL_FLOOR:
        raise ZeroTail(f"final-stage tail {tail} below {_TAIL_FLOOR}")
    all_thresholds = tuple(policy.thresholds) + (spec.final_threshold,)
    reward_est, reward_se = upper_orthant_prob(
        model, OrthantQuery(all_thresholds, spec.columns), integ
    )
    reward = min(reward_est, tail)
    rel_reward = (tail - reward) / tail
    norm_cost = total_cost / (n * pop * float(costs.max()))
    report = ObjectiveReport(
        reward=reward,
        expected_counts=tuple(float(c) for c in counts),
        expected_total_cost=total_cost,
        relative_reward=float(rel_reward),
        normalized_cost=float(norm_cost),
        joint_value=float(alpha * rel_reward + (1.0 - alpha) * norm_cost),
    )
    return PolicyEvaluation(report, reward_se, cost_se)


def reward(
    model: GmmModel,
    spec: PipelineSpec,
    policy: Policy,
    integ: IntegrationConfig = IntegrationConfig(),
) -> float:
    """P[candidate survives all stages including the final threshold].

    Integrated in canonical (most-restrictive-first) order, so the value
    does not depend on how the non-final stages are ordered.
    """
    _check_policy(spec, policy)
    _check_columns(model, spec)
    thresholds = tuple(policy.thresholds) + (spec.final_threshold,)
    est, _ = upper_orthant_prob(
        model, OrthantQuery(thresholds, spec.columns), integ
    )
    return est


def expected_stage_counts(
    model: GmmModel,
    spec: PipelineSpec,
    policy: Policy,
    integ: IntegrationConfig = IntegrationConfig(),
) -> np.ndarray:
    """Expected number of candidates entering each stage; entry 0 is |X|."""
    _check_policy(spec, policy)
    _check_columns(model, spec)
    n = spec.n_stages
    reps = chain_prefix_replicates(
        model, spec.columns[: n - 1], policy.thresholds, integ
    )
    return spec.population * reps.mean(axis=0)


def expected_total_cost(spec: PipelineSpec, counts) -> float:
    """Sum of per-stage cost times expected survivors entering the stage."""
    counts = np.asarray(counts, dtype=np.float64)
    if counts.shape != (spec.n_stages,):
        raise LengthMismatch(
            f"counts has length {counts.size}, pipeline has {spec.n_stages} stages"
        )
    return float(spec.costs @ counts)


def relative_reward(
    model: GmmModel,
    spec: PipelineSpec,
    policy: Policy,
    integ: IntegrationConfig = IntegrationConfig(),
) -> float:
    """Fraction of final-threshold qualifiers lost to upstream screening."""
    return evaluate_policy(model, spec, policy, alpha=1.0, integ=integ).report.relative_reward


def normalized_cost(spec: PipelineSpec, counts) -> float:
    """Expected total cost scaled by its batch-everything bound N*|X|*max(c)."""
    total = expected_total_cost(spec, counts)
    return total / (spec.n_stages * spec.population * float(spec.costs.max()))


def joint_objective(
    model: GmmModel,
    spec: PipelineSpec,
    policy: Policy,
    alpha: float,
    integ: IntegrationConfig = IntegrationConfig(),
) -> ObjectiveReport:
    """Weighted miss-fraction/cost objective with all components populated."""
    return evaluate_policy(model, spec, policy, alpha, integ).report
