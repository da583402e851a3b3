"""Four-stage synthetic benchmark population.

Scores are drawn from a zero-mean Gaussian whose Toeplitz covariance decays
with stage separation: neighboring stages correlate at rho, and each extra
step of separation subtracts 0.1.
"""

from __future__ import annotations

import numpy as np

from .errors import NotPositiveDefinite
from .gmm import GmmComponent, GmmModel, sample
from .tables import ScoreTable

SYNTHETIC_COLUMNS = ("s1", "s2", "s3", "s4")

#: Final-stage threshold that qualifies ~1 in 1000 candidates.
SYNTHETIC_FINAL_THRESHOLD = 3.0902

#: Per-candidate stage costs of the synthetic benchmark.
SYNTHETIC_COSTS = (1.0, 10.0, 100.0, 1000.0)


def toeplitz_covariance(rho: float) -> np.ndarray:
    """Unit-diagonal 4x4 covariance with bands rho, rho-0.1, rho-0.2."""
    first_row = np.array([1.0, rho, rho - 0.1, rho - 0.2])
    idx = np.abs(np.subtract.outer(np.arange(4), np.arange(4)))
    return first_row[idx]


def synthetic_model(rho: float) -> GmmModel:
    """Single-component mixture G(0, Sigma(rho)) over columns s1..s4."""
    if not -1.0 < rho < 1.0:
        raise ValueError(f"rho must be in (-1, 1), got {rho}")
    cov = toeplitz_covariance(rho)
    if np.linalg.eigvalsh(cov)[0] <= 0.0:
        raise NotPositiveDefinite(f"Sigma({rho}) is not positive-definite")
    return GmmModel((GmmComponent(1.0, np.zeros(4), cov),), SYNTHETIC_COLUMNS)


def generate_synthetic(rho: float, n: int, seed: int) -> ScoreTable:
    """Draw n candidates from G(0, Sigma(rho)); deterministic per seed."""
    if n < 1:
        raise ValueError("n must be >= 1")
    model = synthetic_model(rho)
    table = sample(model, n, seed)
    ids = tuple(str(i + 1) for i in range(n))
    return ScoreTable(table.column_names, table.rows, ids=ids)
