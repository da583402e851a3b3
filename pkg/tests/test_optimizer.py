import numpy as np
import pytest

from htvs_opt import (
    BudgetSpec,
    IntegrationConfig,
    OptConfig,
    Policy,
    budget_sweep,
    optimize_budgeted,
    optimize_joint,
)
from htvs_opt.gmm import marginal_ppf
from htvs_opt.objective import evaluate_policy
from htvs_opt.optimizer import _Q_MAX, _policy_quantiles

from conftest import bivariate_model, two_stage_spec

FAST_OPT = OptConfig(seed=5, polish_iters=80, n_polish=4)
FAST_INTEG = IntegrationConfig(n_points=2048, n_randomizations=8, seed=11)


def grid_oracle_budgeted(model, spec, budget, integ, n_grid=2000):
    """Exhaustive quantile-grid search for 2-stage problems."""
    best = (-np.inf, None)
    gaps = []
    prev = None
    qs = np.linspace(0.0, 1.0, n_grid)
    for q in qs:
        q_eff = min(q, _Q_MAX)
        t = -np.inf if q_eff == 0.0 else marginal_ppf(model, spec.columns[0], q_eff)
        ev = evaluate_policy(model, spec, Policy((t,)), 0.5, integ)
        feasible = ev.report.expected_total_cost <= budget * (1 + 1e-6) + 3 * ev.cost_se
        value = ev.report.reward if feasible else -np.inf
        if prev is not None and np.isfinite(value) and np.isfinite(prev):
            gaps.append(abs(value - prev))
        prev = value
        if value > best[0]:
            best = (value, t)
    step = max(gaps) if gaps else 0.0
    return best[0], step


def grid_oracle_joint(model, spec, alpha, integ, n_grid=2000):
    best = (np.inf, None)
    gaps = []
    prev = None
    for q in np.linspace(0.0, 1.0, n_grid):
        q_eff = min(q, _Q_MAX)
        t = -np.inf if q_eff == 0.0 else marginal_ppf(model, spec.columns[0], q_eff)
        value = evaluate_policy(model, spec, Policy((t,)), alpha, integ).report.joint_value
        if prev is not None:
            gaps.append(abs(value - prev))
        prev = value
        if value < best[0]:
            best = (value, t)
    return best[0], max(gaps)


def test_budgeted_unconstrained_budget_opens_everything(model08, spec4, fast_integ):
    total = 111_100_000.0
    res = optimize_budgeted(model08, spec4, BudgetSpec(total), FAST_OPT, fast_integ)
    assert res.feasible
    assert res.policy.thresholds == (-np.inf,) * 3
    from htvs_opt import final_tail

    assert res.report.reward == final_tail(model08, spec4)


def test_budgeted_detection_at_ten_and_fourteen_percent(model08, spec4, integ):
    # 10% of the final-stage-only cost: expect >= 95 of the ~100 qualifiers;
    # 14%: expect >= 97.
    at10 = optimize_budgeted(model08, spec4, BudgetSpec(1e7), OptConfig(seed=5), integ)
    assert at10.feasible
    assert spec4.population * at10.report.reward >= 95.0
    at14 = optimize_budgeted(model08, spec4, BudgetSpec(1.4e7), OptConfig(seed=5), integ)
    assert spec4.population * at14.report.reward >= 97.0


def test_budgeted_below_stage_one_floor_is_infeasible(model08, spec4, fast_integ):
    res = optimize_budgeted(model08, spec4, BudgetSpec(50_000.0), FAST_OPT, fast_integ)
    assert not res.feasible
    assert all(np.isfinite(res.policy.thresholds))


def test_budgeted_respects_budget_on_recheck(model08, spec4, fast_integ):
    budget = 2e7
    res = optimize_budgeted(model08, spec4, BudgetSpec(budget), FAST_OPT, fast_integ)
    assert res.feasible
    recheck = evaluate_policy(
        model08, spec4, res.policy, 0.5,
        IntegrationConfig(n_points=8192, n_randomizations=16, seed=97),
    )
    assert recheck.report.expected_total_cost <= budget * (1 + 1e-6) + 3 * recheck.cost_se


def test_budgeted_deterministic_given_seed(model08, spec4, fast_integ):
    a = optimize_budgeted(model08, spec4, BudgetSpec(1.5e7), FAST_OPT, fast_integ)
    b = optimize_budgeted(model08, spec4, BudgetSpec(1.5e7), FAST_OPT, fast_integ)
    assert a.policy == b.policy
    assert a.report == b.report
    assert a.evaluations == b.evaluations


def test_joint_alpha_one_opens_everything(model08, spec4, fast_integ):
    res = optimize_joint(model08, spec4, 1.0, FAST_OPT, fast_integ)
    assert res.policy.thresholds == (-np.inf,) * 3
    assert res.report.relative_reward == 0.0
    assert res.feasible


def test_joint_alpha_zero_screens_hard(model08, spec4, fast_integ):
    res = optimize_joint(model08, spec4, 0.0, FAST_OPT, fast_integ)
    # cost is all that matters: stage-1 quantiles pushed to the top
    assert res.report.normalized_cost < 0.001


def test_joint_alpha_validation(model08, spec4):
    with pytest.raises(ValueError):
        optimize_joint(model08, spec4, 1.0001)


def test_budgeted_two_stage_matches_grid_oracle():
    model = bivariate_model(0.8)
    spec = two_stage_spec(final_threshold=2.0)
    budget = 2e7
    res = optimize_budgeted(model, spec, BudgetSpec(budget), FAST_OPT, FAST_INTEG)
    oracle, step = grid_oracle_budgeted(model, spec, budget, FAST_INTEG)
    assert res.report.reward >= oracle - step - 1e-9


def test_joint_two_stage_matches_grid_oracle():
    model = bivariate_model(0.8)
    spec = two_stage_spec(final_threshold=2.0)
    res = optimize_joint(model, spec, 0.5, FAST_OPT, FAST_INTEG)
    oracle, step = grid_oracle_joint(model, spec, 0.5, FAST_INTEG)
    assert res.report.joint_value <= oracle + step + 1e-9


def test_budget_sweep_monotone_and_warm_started(model08, fast_integ):
    spec = two_stage_spec(costs=(1.0, 1000.0), final_threshold=3.0902)
    from htvs_opt import marginalize

    model = marginalize(model08, (0, 3))
    budgets = [5e4, 2e6, 5e6, 2e7, 5e7, 1.001e8]
    curve = budget_sweep(model, spec, budgets, FAST_OPT, fast_integ)
    detected = [p.expected_detected for p in curve.points]
    assert detected[0] == 0.0  # below the stage-1 floor
    assert all(b >= a - 1e-12 for a, b in zip(detected[1:], detected[2:]))
    assert detected[-1] > 95.0


def test_budget_sweep_validates_budgets(model08, spec4):
    with pytest.raises(ValueError):
        budget_sweep(model08, spec4, [])
    with pytest.raises(ValueError):
        budget_sweep(model08, spec4, [2e7, 1e7])


def test_optimization_result_serialization(model08, spec4, fast_integ):
    res = optimize_budgeted(model08, spec4, BudgetSpec(1e7), FAST_OPT, fast_integ)
    payload = res.to_json_dict()
    assert set(payload) == {"policy", "report", "feasible", "evaluations"}
    assert len(payload["policy"]) == 3


def test_trace_recording(model08, spec4, fast_integ):
    opt = OptConfig(seed=5, polish_iters=30, n_polish=2, keep_trace=True)
    res = optimize_joint(model08, spec4, 0.5, opt, fast_integ)
    assert res.trace
    policy, value = res.trace[0]
    assert isinstance(policy, Policy)
    assert np.isfinite(value)


def test_policy_quantile_roundtrip(model08, spec4):
    policy = Policy((-np.inf, 0.25, 1.5))
    q = _policy_quantiles(model08, spec4, policy)
    assert q[0] == 0.0
    assert 0.5 < q[1] < 0.7
    assert 0.9 < q[2] < 0.95
