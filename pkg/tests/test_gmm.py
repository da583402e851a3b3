import numpy as np
import pytest

from htvs_opt import (
    BadDimension,
    EmConfig,
    GmmComponent,
    GmmModel,
    ScoreTable,
    TooFewSamples,
    fit_gmm,
    log_likelihood,
    marginal_cdf,
    marginal_ppf,
    marginalize,
    sample,
    select_components,
)
from htvs_opt.gmm import bic, fit_gmm_with_trace, n_free_parameters
from htvs_opt.synthetic import generate_synthetic, toeplitz_covariance


def two_component_1d(delta=2.0):
    return GmmModel(
        (
            GmmComponent(0.5, np.array([-delta]), np.eye(1)),
            GmmComponent(0.5, np.array([delta]), np.eye(1)),
        ),
        ("x",),
    )


def standard_normal_1d():
    return GmmModel((GmmComponent(1.0, np.zeros(1), np.eye(1)),), ("x",))


# ---------------------------------------------------------------------------
# fitting
# ---------------------------------------------------------------------------

def test_fit_recovers_single_gaussian_parameters():
    table = generate_synthetic(0.8, 10_000, seed=3)
    model = fit_gmm(table, k=1, config=EmConfig(seed=0))
    comp = model.components[0]
    assert np.all(np.abs(comp.mean) < 0.05)
    assert np.all(np.abs(comp.covariance - toeplitz_covariance(0.8)) < 0.05)


def test_single_component_mean_is_sample_mean():
    rng = np.random.default_rng(5)
    table = ScoreTable(("a", "b"), rng.normal(size=(200, 2)) * 3.0 + 1.0)
    model = fit_gmm(table, k=1)
    np.testing.assert_allclose(
        model.components[0].mean, table.rows.mean(axis=0), rtol=0, atol=1e-12
    )


def test_fit_recovers_two_component_means():
    truth = two_component_1d()
    table = sample(truth, 4_000, seed=9)
    model = fit_gmm(table, k=2, config=EmConfig(seed=1))
    means = sorted(c.mean[0] for c in model.components)
    assert abs(means[0] - (-2.0)) < 0.1
    assert abs(means[1] - 2.0) < 0.1


def test_fit_too_few_samples():
    table = ScoreTable(("a",), np.zeros((5, 1)) + np.arange(5.0).reshape(-1, 1))
    with pytest.raises(TooFewSamples):
        fit_gmm(table, k=2)


def test_em_loglik_trace_is_monotone():
    truth = two_component_1d(1.5)
    table = sample(truth, 3_000, seed=2)
    for seed in range(4):
        _, trace = fit_gmm_with_trace(table, k=3, config=EmConfig(seed=seed))
        diffs = np.diff(trace)
        assert np.all(diffs >= -1e-9), f"seed {seed}: worst dip {diffs.min()}"


def test_fit_is_deterministic_given_seed():
    table = sample(two_component_1d(), 1_000, seed=4)
    a = fit_gmm(table, k=2, config=EmConfig(seed=7))
    b = fit_gmm(table, k=2, config=EmConfig(seed=7))
    for ca, cb in zip(a.components, b.components):
        assert ca.weight == cb.weight
        assert np.array_equal(ca.mean, cb.mean)
        assert np.array_equal(ca.covariance, cb.covariance)


# ---------------------------------------------------------------------------
# model selection
# ---------------------------------------------------------------------------

def test_select_components_prefers_one_for_unimodal():
    table = generate_synthetic(0.5, 3_000, seed=6)
    k, _ = select_components(table, k_max=3, config=EmConfig(seed=0))
    assert k == 1


def test_select_components_kmax_one_matches_fit():
    table = generate_synthetic(0.8, 500, seed=8)
    k, model = select_components(table, k_max=1, config=EmConfig(seed=0))
    direct = fit_gmm(table, k=1, config=EmConfig(seed=0))
    assert k == 1
    assert np.array_equal(model.components[0].mean, direct.components[0].mean)


def test_select_components_finds_two_modes():
    table = sample(two_component_1d(), 3_000, seed=10)
    k, _ = select_components(table, k_max=4, config=EmConfig(seed=0))
    assert k == 2


def test_bic_parameter_count():
    # k-1 weights, k*d means, k*d*(d+1)/2 covariance entries
    assert n_free_parameters(1, 4) == 14
    assert n_free_parameters(3, 2) == 17


def test_bic_value():
    table = sample(standard_normal_1d(), 100, seed=0)
    model = fit_gmm(table, 1)
    expected = -2.0 * log_likelihood(model, table) + 2 * np.log(100)
    assert bic(model, table) == pytest.approx(expected, rel=1e-12)


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------

def test_sample_covariance_matches_model():
    table = generate_synthetic(0.8, 200_000, seed=12)
    emp = np.cov(table.rows.T)
    assert np.all(np.abs(emp - toeplitz_covariance(0.8)) < 0.02)


def test_sample_single_row():
    table = sample(standard_normal_1d(), 1, seed=0)
    assert table.n_rows == 1
    assert np.isfinite(table.rows).all()


def test_sample_is_bit_deterministic():
    model = two_component_1d()
    a = sample(model, 500, seed=33)
    b = sample(model, 500, seed=33)
    assert np.array_equal(a.rows, b.rows)


def test_sample_component_proportions():
    model = GmmModel(
        (
            GmmComponent(0.2, np.array([-10.0]), np.eye(1)),
            GmmComponent(0.8, np.array([10.0]), np.eye(1)),
        ),
        ("x",),
    )
    table = sample(model, 50_000, seed=1)
    frac_high = np.mean(table.rows[:, 0] > 0)
    assert abs(frac_high - 0.8) < 0.01


# ---------------------------------------------------------------------------
# log-likelihood
# ---------------------------------------------------------------------------

def test_loglik_standard_normal_at_zero():
    table = ScoreTable(("x",), np.array([[0.0]]))
    expected = -0.5 * np.log(2.0 * np.pi)
    assert log_likelihood(standard_normal_1d(), table) == pytest.approx(expected, abs=1e-12)


def test_loglik_additivity_on_duplicate_rows():
    model = two_component_1d()
    row = np.array([[0.37]])
    single = log_likelihood(model, ScoreTable(("x",), row))
    double = log_likelihood(model, ScoreTable(("x",), np.vstack([row, row])))
    assert double == pytest.approx(2.0 * single, rel=1e-14)


def test_refit_loglik_not_below_generator():
    truth = two_component_1d()
    table = sample(truth, 2_000, seed=14)
    refit = fit_gmm(table, k=2, config=EmConfig(seed=0))
    assert log_likelihood(refit, table) >= log_likelihood(truth, table) - 1e-6 * table.n_rows


# ---------------------------------------------------------------------------
# marginalization
# ---------------------------------------------------------------------------

def test_marginalize_all_dims_is_identity():
    model = fit_gmm(generate_synthetic(0.5, 200, seed=1), 1)
    marg = marginalize(model, (0, 1, 2, 3))
    for a, b in zip(model.components, marg.components):
        assert np.array_equal(a.mean, b.mean)
        assert np.array_equal(a.covariance, b.covariance)
    assert marg.column_names == model.column_names


def test_marginalize_single_dim_is_standard_normal():
    from htvs_opt.synthetic import synthetic_model

    marg = marginalize(synthetic_model(0.8), (3,))
    assert marg.dim == 1
    assert marg.components[0].mean[0] == 0.0
    assert marg.components[0].covariance[0, 0] == 1.0


def test_marginalize_corner_pair_has_offdiag_point_six():
    from htvs_opt.synthetic import synthetic_model

    marg = marginalize(synthetic_model(0.8), (0, 3))
    assert marg.components[0].covariance[0, 1] == pytest.approx(0.6, abs=1e-15)
    assert marg.column_names == ("s1", "s4")


def test_marginalize_preserves_requested_order():
    from htvs_opt.synthetic import synthetic_model

    marg = marginalize(synthetic_model(0.8), (2, 0))
    assert marg.column_names == ("s3", "s1")


def test_marginalize_rejects_bad_dims():
    model = standard_normal_1d()
    with pytest.raises(BadDimension):
        marginalize(model, ())
    with pytest.raises(BadDimension):
        marginalize(model, (0, 0))
    with pytest.raises(BadDimension):
        marginalize(model, (1,))


# ---------------------------------------------------------------------------
# marginal cdf / quantiles
# ---------------------------------------------------------------------------

def test_marginal_ppf_inverts_cdf():
    model = two_component_1d()
    for q in (0.05, 0.3, 0.5, 0.9, 0.999):
        x = marginal_ppf(model, 0, q)
        assert marginal_cdf(model, 0, x) == pytest.approx(q, abs=1e-10)


def test_marginal_ppf_extremes():
    model = standard_normal_1d()
    assert marginal_ppf(model, 0, 0.0) == -np.inf
    assert marginal_ppf(model, 0, 1.0) == np.inf


# ---------------------------------------------------------------------------
# model validation
# ---------------------------------------------------------------------------

def test_model_rejects_bad_weight_sum():
    with pytest.raises(ValueError):
        GmmModel(
            (
                GmmComponent(0.6, np.zeros(1), np.eye(1)),
                GmmComponent(0.6, np.zeros(1), np.eye(1)),
            ),
            ("x",),
        )


def test_component_rejects_non_positive_definite():
    from htvs_opt import DegenerateCovariance

    with pytest.raises(DegenerateCovariance):
        GmmComponent(1.0, np.zeros(2), np.array([[1.0, 2.0], [2.0, 1.0]]))
