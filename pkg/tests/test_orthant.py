import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from htvs_opt import (
    BadDimension,
    GmmComponent,
    GmmModel,
    IntegrationConfig,
    NonFiniteThreshold,
    OrthantQuery,
    marginalize,
    sample,
    upper_orthant_prob,
)
from htvs_opt.orthant import chain_prefix_replicates
from htvs_opt.synthetic import synthetic_model

from conftest import bivariate_model
from oracles import bvn_upper


def test_query_validation():
    with pytest.raises(NonFiniteThreshold):
        OrthantQuery((np.nan,), (0,))
    with pytest.raises(BadDimension):
        OrthantQuery((0.0, 0.0), (1, 1))
    with pytest.raises(BadDimension):
        OrthantQuery((0.0,), (0, 1))


def test_out_of_range_dim():
    model = bivariate_model(0.3)
    with pytest.raises(BadDimension):
        upper_orthant_prob(model, OrthantQuery((0.0,), (5,)))


def test_1d_tail_is_exact():
    model = marginalize(synthetic_model(0.8), (3,))
    est, se = upper_orthant_prob(model, OrthantQuery((3.0902,), (0,)))
    assert est == pytest.approx(0.001, abs=1e-4)
    assert se == 0.0


def test_all_neg_inf_is_one():
    model = synthetic_model(0.8)
    est, se = upper_orthant_prob(
        model, OrthantQuery((-np.inf,) * 4, (0, 1, 2, 3))
    )
    assert (est, se) == (1.0, 0.0)


def test_any_pos_inf_is_zero():
    model = synthetic_model(0.8)
    est, se = upper_orthant_prob(
        model, OrthantQuery((0.0, np.inf, 0.0, 0.0), (0, 1, 2, 3))
    )
    assert (est, se) == (0.0, 0.0)


def test_bivariate_zero_thresholds_against_arcsin():
    model = bivariate_model(0.8)
    integ = IntegrationConfig(seed=3)
    est, se = upper_orthant_prob(model, OrthantQuery((0.0, 0.0), (0, 1)), integ)
    truth = 0.25 + np.arcsin(0.8) / (2.0 * np.pi)
    assert abs(est - truth) <= 3.0 * se


def test_bivariate_oracle_hundred_cases():
    rng = np.random.default_rng(2024)
    integ = IntegrationConfig(seed=17)
    worst = 0.0
    for _ in range(100):
        rho = rng.uniform(-0.95, 0.95)
        a, b = rng.uniform(-2.5, 2.5, size=2)
        est, se = upper_orthant_prob(
            bivariate_model(rho), OrthantQuery((a, b), (0, 1)), integ
        )
        err = abs(est - bvn_upper(a, b, rho))
        worst = max(worst, err / max(3.0 * se, 1e-12))
        assert err <= 3.0 * se + 1e-9, (rho, a, b, est, se)
    assert worst > 0.0  # the bound is doing real work


def test_mixture_is_weighted_sum_of_components():
    c1 = GmmComponent(0.3, np.array([0.0, 0.0]), np.array([[1.0, 0.5], [0.5, 1.0]]))
    c2 = GmmComponent(0.7, np.array([1.0, -1.0]), np.array([[2.0, 0.3], [0.3, 1.5]]))
    mix = GmmModel((c1, c2), ("a", "b"))
    integ = IntegrationConfig(seed=5)
    q = OrthantQuery((0.4, -0.2), (0, 1))
    est, se = upper_orthant_prob(mix, q, integ)
    parts = []
    for lone in (c1, c2):
        solo = GmmModel((GmmComponent(1.0, lone.mean, lone.covariance),), ("a", "b"))
        parts.append(upper_orthant_prob(solo, q, integ)[0])
    assert est == pytest.approx(0.3 * parts[0] + 0.7 * parts[1], abs=3 * se + 1e-9)


def test_marginal_consistency_is_exact():
    model = synthetic_model(0.8)
    integ = IntegrationConfig(seed=11)
    padded, _ = upper_orthant_prob(
        model, OrthantQuery((-np.inf, 0.3, -np.inf, 1.0), (0, 1, 2, 3)), integ
    )
    marg = marginalize(model, (1, 3))
    direct, _ = upper_orthant_prob(marg, OrthantQuery((0.3, 1.0), (0, 1)), integ)
    assert padded == direct


def test_raising_thresholds_never_increases_matched_seeds():
    model = synthetic_model(0.8)
    integ = IntegrationConfig(n_points=2048, n_randomizations=8, seed=7)
    rng = np.random.default_rng(1)
    for _ in range(20):
        t = rng.uniform(-1.5, 1.5, size=4)
        k = rng.integers(4)
        before, _ = upper_orthant_prob(model, OrthantQuery(tuple(t), (0, 1, 2, 3)), integ)
        t2 = t.copy()
        t2[k] += rng.uniform(0.2, 1.0)
        after, _ = upper_orthant_prob(model, OrthantQuery(tuple(t2), (0, 1, 2, 3)), integ)
        assert after <= before + 1e-12


def test_raising_thresholds_never_increases_independent_seeds():
    model = synthetic_model(0.5)
    a = IntegrationConfig(n_points=2048, n_randomizations=8, seed=21)
    b = IntegrationConfig(n_points=2048, n_randomizations=8, seed=22)
    t = (0.5, 0.1, -0.4, 1.0)
    t_hi = (0.5, 0.6, -0.4, 1.0)
    lo, se_lo = upper_orthant_prob(model, OrthantQuery(t, (0, 1, 2, 3)), a)
    hi, se_hi = upper_orthant_prob(model, OrthantQuery(t_hi, (0, 1, 2, 3)), b)
    assert hi <= lo + 3.0 * (se_lo + se_hi)


@settings(max_examples=20, deadline=None)
@given(st.permutations(list(range(4))))
def test_permutation_equivariance_exact(perm):
    model = synthetic_model(0.8)
    integ = IntegrationConfig(n_points=1024, n_randomizations=4, seed=13)
    thresholds = (0.31, -0.42, 1.27, 0.88)  # distinct after standardization
    base, _ = upper_orthant_prob(
        model, OrthantQuery(thresholds, (0, 1, 2, 3)), integ
    )
    perm = list(perm)
    comp = model.components[0]
    permuted = GmmModel(
        (
            GmmComponent(
                1.0,
                comp.mean[perm],
                comp.covariance[np.ix_(perm, perm)],
            ),
        ),
        tuple(model.column_names[p] for p in perm),
    )
    # dim d of the original sits at position perm.index(d) in the new model
    new_dims = tuple(perm.index(d) for d in range(4))
    est, _ = upper_orthant_prob(
        permuted, OrthantQuery(thresholds, new_dims), integ
    )
    assert est == base


def test_sampling_and_integration_agree():
    model = synthetic_model(0.8)
    integ = IntegrationConfig(seed=29)
    thresholds = (0.2, -0.3, 0.8, 0.1)
    est, se = upper_orthant_prob(model, OrthantQuery(thresholds, (0, 1, 2, 3)), integ)
    table = sample(model, 100_000, seed=4)
    hits = np.all(table.rows >= np.asarray(thresholds), axis=1)
    freq = hits.mean()
    ci99 = 2.576 * np.sqrt(est * (1.0 - est) / table.n_rows)
    assert abs(freq - est) <= ci99 + 3.0 * se


def test_chain_prefixes_are_pointwise_monotone():
    model = synthetic_model(0.5)
    integ = IntegrationConfig(n_points=1024, n_randomizations=6, seed=19)
    reps = chain_prefix_replicates(model, (0, 1, 2, 3), (0.4, -0.2, 1.1, 0.7), integ)
    assert reps.shape == (6, 5)
    assert np.all(np.diff(reps, axis=1) <= 1e-15)
    assert np.all(reps[:, 0] == 1.0)


def test_chain_neg_inf_prefixes_are_exact_ones():
    model = synthetic_model(0.5)
    reps = chain_prefix_replicates(model, (0, 1, 2), (-np.inf,) * 3)
    assert np.array_equal(reps, np.ones_like(reps))


def test_determinism_given_seed():
    model = synthetic_model(0.8)
    integ = IntegrationConfig(seed=123)
    q = OrthantQuery((0.5, 0.6, 0.7, 0.8), (0, 1, 2, 3))
    assert upper_orthant_prob(model, q, integ) == upper_orthant_prob(model, q, integ)
