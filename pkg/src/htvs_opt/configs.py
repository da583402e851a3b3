"""Tuning knobs for estimation, integration, and policy search.

All configs are immutable and carry their own seed so that every operation
in the package is a pure function of (inputs, config).
"""

from __future__ import annotations

from dataclasses import dataclass


def _check_seed(seed: int) -> None:
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        raise ValueError(f"seed must be a non-negative integer, got {seed!r}")


@dataclass(frozen=True)
class IntegrationConfig:
    """Randomized quasi-Monte-Carlo settings for orthant integration."""

    n_points: int = 8192
    n_randomizations: int = 16
    seed: int = 0

    def __post_init__(self):
        if self.n_points < 1:
            raise ValueError("n_points must be >= 1")
        if self.n_randomizations < 1:
            raise ValueError("n_randomizations must be >= 1")
        _check_seed(self.seed)


@dataclass(frozen=True)
class EmConfig:
    """Expectation-maximization settings for mixture fitting."""

    max_iters: int = 500
    tol: float = 1e-8
    reg_floor: float = 1e-6
    seed: int = 0

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.tol <= 0:
            raise ValueError("tol must be > 0")
        if self.reg_floor <= 0:
            raise ValueError("reg_floor must be > 0")
        _check_seed(self.seed)


#: Quantile levels used to seed the threshold search, one grid per stage.
DEFAULT_SEED_GRID = (0.0, 0.3, 0.5, 0.7, 0.8, 0.9, 0.95, 0.99, 1.0)


@dataclass(frozen=True)
class OptConfig:
    """Policy-search settings: seed grid, local polish, and penalty weight."""

    seed_grid: tuple[float, ...] = DEFAULT_SEED_GRID
    polish_iters: int = 200
    penalty_mu: float = 10.0
    seed: int = 0
    n_polish: int = 8
    lhs_seeds: int = 512
    threads: int = 1
    keep_trace: bool = False

    def __post_init__(self):
        if len(self.seed_grid) < 1:
            raise ValueError("seed_grid must have at least one level")
        if any(not 0.0 <= q <= 1.0 for q in self.seed_grid):
            raise ValueError("seed_grid levels must lie in [0, 1]")
        if self.polish_iters < 1:
            raise ValueError("polish_iters must be >= 1")
        if self.penalty_mu <= 0:
            raise ValueError("penalty_mu must be > 0")
        if self.n_polish < 1 or self.lhs_seeds < 1 or self.threads < 1:
            raise ValueError("n_polish, lhs_seeds, and threads must be >= 1")
        _check_seed(self.seed)
