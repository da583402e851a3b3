"""Threshold-policy search.

Two problems are solved over the same machinery: maximize detection
probability under an expected-cost budget (exact penalty + feasibility
projection), and minimize the weighted miss-fraction/cost combination.

Thresholds are searched in quantile space: each non-final stage threshold is
expressed as a marginal quantile in [0, 1], where 0 means screen nothing out
(-inf) and 1 is clipped to a finite extreme quantile. The search seeds a
quantile grid (full Cartesian product for up to three free stages, Latin
hypercube beyond), polishes the best seeds with Nelder-Mead, then re-checks
the shortlist at full integration accuracy with a fresh seed before picking
the winner.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import minimize
from scipy.stats import qmc

from .configs import IntegrationConfig, OptConfig
from .errors import ColumnMissing, EmptyTable
from .gmm import GmmModel, marginal_cdf, marginal_ppf
from .objective import (
    ObjectiveReport,
    PipelineSpec,
    Policy,
    PolicyEvaluation,
    evaluate_policy,
)
from .tables import ScoreTable

# Quantile 1.0 must still map to a finite threshold (results never carry +inf).
_Q_MAX = 1.0 - 1e-9


@dataclass(frozen=True)
class BudgetSpec:
    """Total expected-cost budget, in the same units as cost * count."""

    budget: float

    def __post_init__(self):
        if not self.budget > 0:
            raise ValueError("budget must be > 0")


@dataclass(frozen=True)
class OptimizationResult:
    policy: Policy
    report: ObjectiveReport
    feasible: bool
    evaluations: int
    trace: tuple[tuple[Policy, float], ...] | None = None

    def to_json_dict(self) -> dict:
        return {
            "policy": list(self.policy.thresholds),
            "report": self.report.to_json_dict(),
            "feasible": self.feasible,
            "evaluations": self.evaluations,
        }


@dataclass(frozen=True)
class BudgetPoint:
    budget: float
    expected_detected: float
    policy: Policy
    empirical_detected: int | None = None


@dataclass(frozen=True)
class BudgetCurve:
    points: tuple[BudgetPoint, ...]

    def __post_init__(self):
        points = tuple(self.points)
        budgets = [p.budget for p in points]
        if any(b2 <= b1 for b1, b2 in zip(budgets, budgets[1:])):
            raise ValueError("budgets must be strictly increasing")
        object.__setattr__(self, "points", points)

    @property
    def n_thresholds(self) -> int:
        return len(self.points[0].policy) if self.points else 0


class _QuantileMap:
    """Maps per-stage quantile vectors to threshold policies (cached)."""

    def __init__(self, model: GmmModel, spec: PipelineSpec):
        self.columns = spec.columns[:-1]
        self.model = model
        self._cache: dict[tuple[int, float], float] = {}

    def threshold(self, stage_idx: int, q: float) -> float:
        q = min(max(q, 0.0), _Q_MAX)
        if q == 0.0:
            return -np.inf
        key = (stage_idx, round(q, 12))
        if key not in self._cache:
            self._cache[key] = marginal_ppf(self.model, self.columns[stage_idx], key[1])
        return self._cache[key]

    def policy(self, quantiles) -> Policy:
        return Policy(
            tuple(self.threshold(i, q) for i, q in enumerate(quantiles))
        )


def _search_integ(integ: IntegrationConfig) -> IntegrationConfig:
    # Cheaper integration during search; the shortlist is re-checked at full
    # accuracy. Same seed everywhere: common random numbers across policies.
    return replace(
        integ,
        n_points=max(512, integ.n_points // 4),
        n_randomizations=max(4, integ.n_randomizations // 2),
    )


def _seed_quantiles(n_free: int, opt: OptConfig) -> np.ndarray:
    levels = np.asarray(opt.seed_grid)
    if n_free <= 3:
        grids = np.meshgrid(*([levels] * n_free), indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1)
    lhs = qmc.LatinHypercube(d=n_free, seed=opt.seed)
    return lhs.random(opt.lhs_seeds)


class _Search:
    """Shared state for one optimization run."""

    def __init__(self, model, spec, alpha, integ, opt):
        self.model = model
        self.spec = spec
        self.alpha = alpha
        self.opt = opt
        self.integ = integ
        self.search_integ = _search_integ(integ)
        self.recheck_integ = replace(integ, seed=integ.seed + 1)
        self.qmap = _QuantileMap(model, spec)
        self.evaluations = 0
        self.trace: list[tuple[Policy, float]] = []

    def evaluate(self, quantiles, integ) -> tuple[Policy, PolicyEvaluation]:
        policy = self.qmap.policy(quantiles)
        self.evaluations += 1
        return policy, evaluate_policy(
            self.model, self.spec, policy, self.alpha, integ
        )

    def run(self, objective, warm_starts=()):
        """Return candidate quantile vectors sorted by search objective.

        ``objective(evaluation) -> float`` is minimized.
        """
        n_free = self.spec.n_stages - 1
        seeds = _seed_quantiles(n_free, self.opt)
        if len(warm_starts):
            seeds = np.vstack([np.asarray(warm_starts).reshape(-1, n_free), seeds])

        def eval_seed(q):
            _, ev = self.evaluate(q, self.search_integ)
            return objective(ev)

        if self.opt.threads > 1:
            with ThreadPoolExecutor(max_workers=self.opt.threads) as ex:
                values = list(ex.map(eval_seed, seeds))
        else:
            values = [eval_seed(q) for q in seeds]
        order = np.argsort(values, kind="stable")
        top = order[: self.opt.n_polish]

        candidates = [seeds[i] for i in order[: max(self.opt.n_polish, 1)]]
        for i in top:
            candidates.append(self._polish(seeds[i], objective))
        # Warm starts always reach the recheck shortlist, whatever their rank.
        candidates.extend(np.asarray(w, dtype=float) for w in warm_starts)
        # Deduplicate (polish often converges to the same point).
        seen, unique = set(), []
        for q in candidates:
            key = tuple(np.round(np.clip(q, 0.0, 1.0), 6))
            if key not in seen:
                seen.add(key)
                unique.append(np.clip(q, 0.0, 1.0))
        return unique

    def _polish(self, q0, objective) -> np.ndarray:
        def fun(q):
            policy, ev = self.evaluate(q, self.search_integ)
            value = objective(ev)
            if self.opt.keep_trace:
                self.trace.append((policy, float(value)))
            return value

        res = minimize(
            fun,
            np.asarray(q0, dtype=float),
            method="Nelder-Mead",
            options={
                "maxiter": self.opt.polish_iters,
                "xatol": 1e-4,
                "fatol": 1e-12,
            },
        )
        return np.clip(res.x, 0.0, 1.0)


def _pick_best(entries, key):
    """Min by key; ties broken toward lexicographically lower thresholds."""
    best = None
    for policy, ev, q in entries:
        k = key(ev)
        if (
            best is None
            or k < best[0] - 1e-12
            or (abs(k - best[0]) <= 1e-12 and policy.thresholds < best[1].thresholds)
        ):
            best = (k, policy, ev, q)
    return best


def optimize_budgeted(
    model: GmmModel,
    spec: PipelineSpec,
    budget: BudgetSpec,
    opt: OptConfig = OptConfig(),
    integ: IntegrationConfig = IntegrationConfig(),
    warm_starts=(),
) -> OptimizationResult:
    """Maximize detection probability subject to expected cost <= budget."""
    search = _Search(model, spec, 0.5, integ, opt)
    c1_floor = spec.stages[0].cost * spec.population
    n_free = spec.n_stages - 1

    if budget.budget < c1_floor:
        # Stage 1 is batch-processed on the whole population: nothing fits.
        policy, ev = search.evaluate(np.ones(n_free), search.recheck_integ)
        return OptimizationResult(
            policy, ev.report, False, search.evaluations,
            tuple(search.trace) if opt.keep_trace else None,
        )

    mu = opt.penalty_mu

    def objective(ev: PolicyEvaluation) -> float:
        over = max(0.0, ev.report.expected_total_cost - budget.budget)
        return -(ev.report.reward - mu * over / budget.budget)

    def within_budget(ev: PolicyEvaluation) -> bool:
        # 3x the cost standard error, plus a relative epsilon so a budget
        # sitting exactly on the stage-1 floor still counts as affordable.
        slack = 3.0 * ev.cost_se + 1e-6 * budget.budget
        return ev.report.expected_total_cost <= budget.budget + slack

    candidates = search.run(objective, warm_starts)
    rechecked = []
    for q in candidates:
        policy, ev = search.evaluate(q, search.recheck_integ)
        if within_budget(ev):
            rechecked.append((policy, ev, q))
    if not rechecked:
        q = _project_feasible(search, candidates[0], budget.budget)
        policy, ev = search.evaluate(q, search.recheck_integ)
        if not within_budget(ev):
            return OptimizationResult(
                policy, ev.report, False, search.evaluations,
                tuple(search.trace) if opt.keep_trace else None,
            )
        rechecked.append((policy, ev, q))
    _, policy, ev, _ = _pick_best(rechecked, key=lambda e: -e.report.reward)
    return OptimizationResult(
        policy, ev.report, True, search.evaluations,
        tuple(search.trace) if opt.keep_trace else None,
    )


def _project_feasible(search: _Search, q, budget: float) -> np.ndarray:
    """Uniformly raise quantiles toward 1 until the budget holds."""
    q = np.clip(np.asarray(q, dtype=float), 0.0, 1.0)

    def cost_at(t):
        qt = q + t * (1.0 - q)
        _, ev = search.evaluate(qt, search.recheck_integ)
        return ev.report.expected_total_cost

    lo, hi = 0.0, 1.0
    for _ in range(25):
        mid = 0.5 * (lo + hi)
        if cost_at(mid) <= budget:
            hi = mid
        else:
            lo = mid
    return q + hi * (1.0 - q)


def optimize_joint(
    model: GmmModel,
    spec: PipelineSpec,
    alpha: float,
    opt: OptConfig = OptConfig(),
    integ: IntegrationConfig = IntegrationConfig(),
    warm_starts=(),
) -> OptimizationResult:
    """Minimize alpha * miss-fraction + (1 - alpha) * normalized cost."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must be in [0, 1], got {alpha}")
    search = _Search(model, spec, alpha, integ, opt)
    candidates = search.run(lambda ev: ev.report.joint_value, warm_starts)
    rechecked = [
        (policy, ev, q)
        for q in candidates
        for policy, ev in [search.evaluate(q, search.recheck_integ)]
    ]
    _, policy, ev, _ = _pick_best(rechecked, key=lambda e: e.report.joint_value)
    return OptimizationResult(
        policy, ev.report, True, search.evaluations,
        tuple(search.trace) if opt.keep_trace else None,
    )


def budget_sweep(
    model: GmmModel,
    spec: PipelineSpec,
    budgets,
    opt: OptConfig = OptConfig(),
    integ: IntegrationConfig = IntegrationConfig(),
) -> BudgetCurve:
    """Optimize per budget (ascending), warm-starting from the previous
    optimum; infeasible budgets report zero expected detections."""
    budgets = [float(b) for b in budgets]
    if not budgets:
        raise ValueError("budgets must be non-empty")
    if any(b2 <= b1 for b1, b2 in zip(budgets, budgets[1:])):
        raise ValueError("budgets must be sorted strictly ascending")

    points = []
    warm: list[np.ndarray] = []
    qmap = _QuantileMap(model, spec)
    for b in budgets:
        result = optimize_budgeted(
            model, spec, BudgetSpec(b), opt, integ, warm_starts=warm
        )
        if result.feasible:
            detected = spec.population * result.report.reward
            warm = warm + [_policy_quantiles(model, spec, result.policy)]
        else:
            detected = 0.0
        points.append(BudgetPoint(b, float(detected), result.policy))
    return BudgetCurve(tuple(points))


def _policy_quantiles(model: GmmModel, spec: PipelineSpec, policy: Policy) -> np.ndarray:
    return np.array(
        [
            0.0 if t == -np.inf else marginal_cdf(model, col, t)
            for t, col in zip(policy.thresholds, spec.columns[:-1])
        ]
    )


def _keep_count(fraction: float, n: int) -> int:
    # ceil, guarded against products like 0.07 * 100 = 7.000000000000001
    return max(1, math.ceil(fraction * n - 1e-9))


def baseline_thresholds(
    table: ScoreTable, spec: PipelineSpec, top_fraction: float
) -> Policy:
    """Thresholds realized by keeping the top fraction of survivors at each
    non-final stage of the given table; cutoff ties all pass."""
    if table.n_rows == 0:
        raise EmptyTable("baseline needs at least one row")
    if not 0.0 < top_fraction <= 1.0:
        raise ValueError(f"top_fraction must be in (0, 1], got {top_fraction}")
    bad = [c for c in spec.columns if c >= table.dim]
    if bad:
        raise ColumnMissing(f"table has no column index {bad}")
    if top_fraction == 1.0:
        return Policy.all_open(spec.n_stages)

    alive = np.ones(table.n_rows, dtype=bool)
    thresholds = []
    for stage in spec.stages[:-1]:
        scores = table.rows[alive, stage.column]
        keep = _keep_count(top_fraction, scores.size)
        thr = float(np.partition(scores, scores.size - keep)[scores.size - keep])
        thresholds.append(thr)
        alive &= table.rows[:, stage.column] >= thr
    return Policy(tuple(thresholds))
