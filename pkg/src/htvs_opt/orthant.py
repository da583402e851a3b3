"""Upper-orthant probabilities of Gaussian mixtures.

Each component is reduced to a standardized correlation problem and
integrated with randomized quasi-Monte-Carlo over the sequential-conditioning
(separation of variables) transform: a Kronecker lattice sequence with a tent
periodization, randomly shifted once per randomization. The spread across the
random shifts yields an unbiased standard error.

Thresholds of -inf drop their dimension before integration; a 1-D problem is
evaluated in closed form.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cholesky
from scipy.special import ndtr, ndtri

from .configs import IntegrationConfig
from .errors import BadDimension, NonFiniteThreshold
from .gmm import GmmModel, _check_dims

# ndtri argument clamp: keeps conditioning draws finite even when an interval
# probability underflows to 0 or rounds to 1.
_ARG_LO = 1e-300
_ARG_HI = 1.0 - 1e-16


@dataclass(frozen=True)
class OrthantQuery:
    """Lower bounds over a subset of model dimensions (-inf allowed)."""

    thresholds: tuple[float, ...]
    dims: tuple[int, ...]

    def __post_init__(self):
        thresholds = tuple(float(t) for t in self.thresholds)
        dims = tuple(int(d) for d in self.dims)
        if len(thresholds) != len(dims):
            raise BadDimension("thresholds and dims must have the same length")
        if len(set(dims)) != len(dims):
            raise BadDimension(f"dims must be distinct, got {dims}")
        if any(np.isnan(t) for t in thresholds):
            raise NonFiniteThreshold("thresholds must not be NaN")
        object.__setattr__(self, "thresholds", thresholds)
        object.__setattr__(self, "dims", dims)


def _primes(n: int) -> np.ndarray:
    out, cand = [], 2
    while len(out) < n:
        if all(cand % p for p in out):
            out.append(cand)
        cand += 1
    return np.array(out, dtype=np.float64)


def _lattice_points(
    n_points: int, n_dims: int, shifts: np.ndarray
) -> np.ndarray:
    """Tent-transformed Kronecker sequence, one random shift per replicate.

    Returns an array of shape (n_shifts, n_points, n_dims) in (0, 1].
    """
    gen = np.sqrt(_primes(n_dims)) % 1.0
    i = np.arange(1, n_points + 1, dtype=np.float64)
    base = i[None, :, None] * gen[None, None, :] + shifts[:, None, :]
    base -= np.floor(base)
    return np.abs(2.0 * base - 1.0)


def _component_shift_seed(seed: int, comp_index: int) -> np.random.Generator:
    # Counter-based child streams: independent of evaluation order.
    return np.random.default_rng(np.random.SeedSequence([seed, comp_index]))


def _standardize(comp, dims: np.ndarray, thresholds: np.ndarray):
    mean = comp.mean[dims]
    cov = comp.covariance[np.ix_(dims, dims)]
    sd = np.sqrt(np.diag(cov))
    corr = cov / np.outer(sd, sd)
    a = (thresholds - mean) / sd
    return corr, a


def _chain_products(
    corr: np.ndarray, a: np.ndarray, x: np.ndarray, prefixes: bool
) -> np.ndarray:
    """Sequential-conditioning survival products for one component.

    x holds QMC points of shape (n_shifts, n_points, m-1). Returns per-shift
    means: shape (n_shifts, m+1) of prefix products when ``prefixes`` is set,
    else (n_shifts,) of the full product.
    """
    m = a.size
    L = cholesky(corr, lower=True)
    n_shifts, n_points = x.shape[0], x.shape[1]
    prod = np.ones((n_shifts, n_points))
    out = np.ones((n_shifts, m + 1)) if prefixes else None
    y = np.empty((m - 1, n_shifts, n_points))
    for j in range(m):
        if j == 0:
            d = np.full((n_shifts, n_points), ndtr(a[0]))
        else:
            s = np.tensordot(L[j, :j], y[:j], axes=(0, 0))
            d = ndtr((a[j] - s) / L[j, j])
        prod = prod * (1.0 - d)
        if prefixes:
            out[:, j + 1] = prod.mean(axis=1)
        if j < m - 1:
            arg = np.clip(d + x[:, :, j] * (1.0 - d), _ARG_LO, _ARG_HI)
            y[j] = ndtri(arg)
    if prefixes:
        return out
    return prod.mean(axis=1)


def chain_prefix_replicates(
    model: GmmModel,
    dims,
    thresholds,
    integ: IntegrationConfig = IntegrationConfig(),
) -> np.ndarray:
    """Per-shift estimates of every prefix survival probability.

    Entry [r, i] of the returned (n_randomizations, len(dims)+1) array
    estimates P[y_{dims[0]} >= t_0, ..., y_{dims[i-1]} >= t_{i-1}] from
    randomization r, integrating in the given order. Prefix 0 is exactly 1.
    Dimensions with threshold -inf contribute an exact factor of 1 and are
    dropped from the integration.
    """
    dims = _check_dims(dims, model.dim)
    t = np.array([float(v) for v in thresholds])
    if t.size != len(dims):
        raise BadDimension("thresholds and dims must have the same length")
    if np.any(np.isnan(t)):
        raise NonFiniteThreshold("thresholds must not be NaN")

    keep = t > -np.inf
    m = int(keep.sum())
    n_req = len(dims)
    # prefix index in the reduced chain for each requested prefix length
    reduced_len = np.concatenate([[0], np.cumsum(keep)]).astype(int)
    if m == 0:
        return np.ones((integ.n_randomizations, n_req + 1))

    kept_dims = np.asarray(dims)[keep]
    kept_t = t[keep]
    mix = np.zeros((integ.n_randomizations, m + 1))
    for ci, comp in enumerate(model.components):
        corr, a = _standardize(comp, kept_dims, kept_t)
        if m == 1:
            rep = np.ones((integ.n_randomizations, 2))
            rep[:, 1] = 1.0 - ndtr(a[0])
        else:
            rng = _component_shift_seed(integ.seed, ci)
            shifts = rng.random((integ.n_randomizations, m - 1))
            x = _lattice_points(integ.n_points, m - 1, shifts)
            rep = _chain_products(corr, a, x, prefixes=True)
        mix += comp.weight * rep
    return mix[:, reduced_len]


def _estimate_from_replicates(reps: np.ndarray) -> tuple[float, float]:
    est = float(np.mean(reps))
    if reps.size < 2:
        return min(max(est, 0.0), 1.0), 0.0
    se = float(np.std(reps, ddof=1) / np.sqrt(reps.size))
    return min(max(est, 0.0), 1.0), se


def upper_orthant_prob(
    model: GmmModel,
    query: OrthantQuery,
    integ: IntegrationConfig = IntegrationConfig(),
) -> tuple[float, float]:
    """Estimate P[y_d >= t_d for all d in query] and its standard error.

    Components are integrated most-restrictive-dimension first (sorted by
    standardized threshold), which also makes the estimate invariant under
    a joint permutation of model dimensions and query dims.
    """
    dims = _check_dims(query.dims, model.dim)
    t = np.array(query.thresholds, dtype=np.float64)
    if np.any(t == np.inf):
        return 0.0, 0.0
    keep = t > -np.inf
    m = int(keep.sum())
    if m == 0:
        return 1.0, 0.0
    kept_dims = np.asarray(dims)[keep]
    kept_t = t[keep]

    if m == 1:
        exact = sum(
            c.weight * (1.0 - ndtr(_standardize(c, kept_dims, kept_t)[1][0]))
            for c in model.components
        )
        return min(max(float(exact), 0.0), 1.0), 0.0

    reps = np.zeros(integ.n_randomizations)
    for ci, comp in enumerate(model.components):
        corr, a = _standardize(comp, kept_dims, kept_t)
        order = np.argsort(-a, kind="stable")
        corr = corr[np.ix_(order, order)]
        a = a[order]
        rng = _component_shift_seed(integ.seed, ci)
        shifts = rng.random((integ.n_randomizations, m - 1))
        x = _lattice_points(integ.n_points, m - 1, shifts)
        reps += comp.weight * _chain_products(corr, a, x, prefixes=False)
    return _estimate_from_replicates(reps)
