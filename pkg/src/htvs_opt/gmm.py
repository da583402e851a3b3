"""Gaussian mixture models over joint stage scores.

Covers estimation (EM with k-means++ seeding and an eigenvalue floor on
covariances), component-count selection by BIC, sampling, marginalization,
and log-likelihood evaluation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cholesky, solve_triangular
from scipy.special import logsumexp, ndtr
from scipy.optimize import brentq

from .configs import EmConfig
from .errors import (
    BadDimension,
    DegenerateCovariance,
    DuplicateColumn,
    LengthMismatch,
    NonFiniteInput,
    TooFewSamples,
)
from .tables import ScoreTable

_LOG_2PI = np.log(2.0 * np.pi)


@dataclass(frozen=True)
class GmmComponent:
    weight: float
    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.float64)
        cov = np.asarray(self.covariance, dtype=np.float64)
        if self.weight <= 0.0:
            raise ValueError(f"component weight must be > 0, got {self.weight}")
        if mean.ndim != 1 or cov.shape != (mean.size, mean.size):
            raise LengthMismatch("mean/covariance shapes are inconsistent")
        if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(cov))):
            raise NonFiniteInput("component parameters contain non-finite values")
        if not np.allclose(cov, cov.T, rtol=0.0, atol=1e-10):
            raise DegenerateCovariance("covariance is not symmetric")
        try:
            cholesky(cov, lower=True)
        except np.linalg.LinAlgError as exc:  # pragma: no cover - scipy raises its own
            raise DegenerateCovariance(str(exc)) from exc
        except Exception as exc:
            raise DegenerateCovariance(f"covariance is not positive-definite: {exc}") from exc
        mean.setflags(write=False)
        cov.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", cov)

    def cholesky_lower(self) -> np.ndarray:
        return cholesky(self.covariance, lower=True)


@dataclass(frozen=True)
class GmmModel:
    """Weighted multivariate Gaussian mixture over named score columns."""

    components: tuple[GmmComponent, ...]
    column_names: tuple[str, ...]

    def __post_init__(self):
        comps = tuple(self.components)
        names = tuple(self.column_names)
        if not comps:
            raise ValueError("model needs at least one component")
        dim = comps[0].mean.size
        if any(c.mean.size != dim for c in comps):
            raise LengthMismatch("components disagree on dimension")
        if len(names) != dim:
            raise LengthMismatch(f"{len(names)} column names for dimension {dim}")
        if len(set(names)) != len(names):
            raise DuplicateColumn(f"duplicate column names in {names}")
        total = sum(c.weight for c in comps)
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"component weights sum to {total}, expected 1")
        object.__setattr__(self, "components", comps)
        object.__setattr__(self, "column_names", names)

    @property
    def dim(self) -> int:
        return self.components[0].mean.size

    @property
    def n_components(self) -> int:
        return len(self.components)

    @property
    def weights(self) -> np.ndarray:
        return np.array([c.weight for c in self.components])


def _check_dims(dims, dim: int) -> tuple[int, ...]:
    dims = tuple(int(d) for d in dims)
    if not dims:
        raise BadDimension("dims must be non-empty")
    if len(set(dims)) != len(dims):
        raise BadDimension(f"dims must be distinct, got {dims}")
    if any(d < 0 or d >= dim for d in dims):
        raise BadDimension(f"dims {dims} out of range for dimension {dim}")
    return dims


def marginalize(model: GmmModel, dims) -> GmmModel:
    """Restrict the mixture to a subset of dimensions, preserving order."""
    dims = _check_dims(dims, model.dim)
    idx = np.asarray(dims)
    comps = tuple(
        GmmComponent(c.weight, c.mean[idx], c.covariance[np.ix_(idx, idx)])
        for c in model.components
    )
    return GmmModel(comps, tuple(model.column_names[d] for d in dims))


def sample(model: GmmModel, n: int, seed: int) -> ScoreTable:
    """Draw n i.i.d. rows; component by weight, then mean + L @ z."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    k = model.n_components
    comp_idx = rng.choice(k, size=n, p=model.weights) if k > 1 else np.zeros(n, dtype=int)
    z = rng.standard_normal((n, model.dim))
    rows = np.empty_like(z)
    for j, comp in enumerate(model.components):
        mask = comp_idx == j
        if not np.any(mask):
            continue
        L = comp.cholesky_lower()
        rows[mask] = comp.mean + z[mask] @ L.T
    return ScoreTable(model.column_names, rows)


def _component_logpdf(X: np.ndarray, comp: GmmComponent) -> np.ndarray:
    L = comp.cholesky_lower()
    diff = (X - comp.mean).T
    sol = solve_triangular(L, diff, lower=True)
    log_det = np.sum(np.log(np.diag(L)))
    d = comp.mean.size
    return -0.5 * np.sum(sol**2, axis=0) - log_det - 0.5 * d * _LOG_2PI


def _log_joint(X: np.ndarray, model: GmmModel) -> np.ndarray:
    """(n, k) matrix of log(weight_j) + log N(x_i | comp_j)."""
    out = np.empty((X.shape[0], model.n_components))
    for j, comp in enumerate(model.components):
        out[:, j] = np.log(comp.weight) + _component_logpdf(X, comp)
    return out


def log_likelihood(model: GmmModel, samples: ScoreTable) -> float:
    """Sum of log mixture densities over all rows (log-sum-exp over components)."""
    if samples.dim != model.dim:
        raise LengthMismatch(
            f"table has {samples.dim} columns, model has dimension {model.dim}"
        )
    if not np.all(np.isfinite(samples.rows)):
        raise NonFiniteInput("samples contain non-finite entries")
    return float(np.sum(logsumexp(_log_joint(samples.rows, model), axis=1)))


def _kmeanspp_centers(Z: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = Z.shape[0]
    centers = np.empty((k, Z.shape[1]))
    centers[0] = Z[rng.integers(n)]
    d2 = np.sum((Z - centers[0]) ** 2, axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            centers[j] = Z[rng.integers(n)]
            continue
        centers[j] = Z[rng.choice(n, p=d2 / total)]
        d2 = np.minimum(d2, np.sum((Z - centers[j]) ** 2, axis=1))
    return centers


def _floor_covariance(cov: np.ndarray, floor: float) -> np.ndarray:
    cov = 0.5 * (cov + cov.T)
    vals, vecs = np.linalg.eigh(cov)
    if vals[0] >= floor:
        return cov
    vals = np.maximum(vals, floor)
    return (vecs * vals) @ vecs.T


def _m_step(X: np.ndarray, resp: np.ndarray, floor: float):
    n, d = X.shape
    nk = resp.sum(axis=0)
    weights = nk / n
    means = (resp.T @ X) / nk[:, None]
    covs = np.empty((resp.shape[1], d, d))
    for j in range(resp.shape[1]):
        diff = X - means[j]
        covs[j] = (resp[:, j] * diff.T) @ diff / nk[j]
        covs[j] = _floor_covariance(covs[j], floor)
    return weights, means, covs


def fit_gmm_with_trace(
    samples: ScoreTable, k: int, config: EmConfig = EmConfig()
) -> tuple[GmmModel, list[float]]:
    """Fit a k-component mixture by EM; also return the per-iteration
    log-likelihood trace (one entry per E-step)."""
    if k < 1:
        raise ValueError("k must be >= 1")
    X = samples.rows
    n, d = X.shape
    if not np.all(np.isfinite(X)):
        raise NonFiniteInput("samples contain non-finite entries")
    if n < k * (d + 2):
        raise TooFewSamples(f"need at least {k * (d + 2)} rows for k={k}, have {n}")

    rng = np.random.default_rng(config.seed)
    mu0 = X.mean(axis=0)
    sd0 = X.std(axis=0)
    sd0[sd0 == 0.0] = 1.0
    Z = (X - mu0) / sd0
    centers = _kmeanspp_centers(Z, k, rng)
    assign = np.argmin(
        ((Z[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2), axis=1
    )
    resp = np.zeros((n, k))
    resp[np.arange(n), assign] = 1.0
    # Empty initial cluster: give it a uniform sliver so the M-step is defined.
    empty = resp.sum(axis=0) == 0
    if np.any(empty):
        resp[:, empty] = 1e-6
        resp /= resp.sum(axis=1, keepdims=True)

    weights, means, covs = _m_step(X, resp, config.reg_floor)
    trace: list[float] = []
    prev_ll = -np.inf
    reseeds = 0
    for _ in range(config.max_iters):
        model = _build_model(weights, means, covs, samples.column_names)
        log_joint = _log_joint(X, model)
        row_ll = logsumexp(log_joint, axis=1)
        ll = float(row_ll.sum())
        trace.append(ll)
        if np.isfinite(prev_ll) and abs(ll - prev_ll) < config.tol * abs(prev_ll):
            break
        prev_ll = ll
        resp = np.exp(log_joint - row_ll[:, None])
        nk = resp.sum(axis=0)
        starved = nk < 1e-10 * n
        if np.any(starved):
            # Re-seed a collapsed component at the worst-explained point.
            if reseeds >= 10 * k:
                raise DegenerateCovariance(
                    "mixture component collapsed and could not be repaired"
                )
            reseeds += 1
            worst = int(np.argmin(row_ll))
            for j in np.where(starved)[0]:
                resp[:, j] = 0.0
                resp[worst, j] = 1.0
            resp /= resp.sum(axis=1, keepdims=True)
        weights, means, covs = _m_step(X, resp, config.reg_floor)
    model = _build_model(weights, means, covs, samples.column_names)
    return model, trace


def _build_model(weights, means, covs, column_names) -> GmmModel:
    weights = np.asarray(weights, dtype=np.float64)
    weights = weights / weights.sum()
    comps = tuple(
        GmmComponent(float(w), m, c) for w, m, c in zip(weights, means, covs)
    )
    return GmmModel(comps, tuple(column_names))


def fit_gmm(samples: ScoreTable, k: int, config: EmConfig = EmConfig()) -> GmmModel:
    """Fit a k-component Gaussian mixture to the table by EM."""
    model, _ = fit_gmm_with_trace(samples, k, config)
    return model


def n_free_parameters(k: int, d: int) -> int:
    return (k - 1) + k * d + k * d * (d + 1) // 2


def bic(model: GmmModel, samples: ScoreTable) -> float:
    ll = log_likelihood(model, samples)
    p = n_free_parameters(model.n_components, model.dim)
    return -2.0 * ll + p * np.log(samples.n_rows)


def select_components(
    samples: ScoreTable, k_max: int, config: EmConfig = EmConfig()
) -> tuple[int, GmmModel]:
    """Fit k = 1..k_max and keep the BIC minimizer; ties go to smaller k."""
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    best: tuple[float, int, GmmModel] | None = None
    for k in range(1, k_max + 1):
        model = fit_gmm(samples, k, config)
        score = bic(model, samples)
        if best is None or score < best[0]:
            best = (score, k, model)
    assert best is not None
    return best[1], best[2]


def bic_table(
    samples: ScoreTable, k_max: int, config: EmConfig = EmConfig()
) -> list[tuple[int, float]]:
    """(k, BIC) for k = 1..k_max, in order."""
    out = []
    for k in range(1, k_max + 1):
        out.append((k, bic(fit_gmm(samples, k, config), samples)))
    return out


def marginal_cdf(model: GmmModel, dim: int, x: float) -> float:
    """CDF of the 1-D marginal of the mixture at column ``dim``."""
    _check_dims((dim,), model.dim)
    total = 0.0
    for c in model.components:
        sd = np.sqrt(c.covariance[dim, dim])
        total += c.weight * ndtr((x - c.mean[dim]) / sd)
    return float(total)


def marginal_ppf(model: GmmModel, dim: int, q: float) -> float:
    """Quantile of the 1-D marginal of the mixture at column ``dim``.

    q = 0 maps to -inf and q = 1 to +inf.
    """
    _check_dims((dim,), model.dim)
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"quantile must be in [0, 1], got {q}")
    if q == 0.0:
        return -np.inf
    if q == 1.0:
        return np.inf
    mus = np.array([c.mean[dim] for c in model.components])
    sds = np.array([np.sqrt(c.covariance[dim, dim]) for c in model.components])
    lo = float(np.min(mus - 12.0 * sds))
    hi = float(np.max(mus + 12.0 * sds))
    return float(brentq(lambda x: marginal_cdf(model, dim, x) - q, lo, hi, xtol=1e-12))
