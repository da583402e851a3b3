"""Campaign configuration: one JSON document describing a full run.

A campaign names the pipeline (stages, costs, final threshold, population),
the optimization mode (budgeted or joint), where the score distribution
comes from (a known model or a fit on a held-in fraction of a table), and
the integration/optimizer settings. The ``paper-synthetic`` preset expands
to the four-stage benchmark pipeline with costs 1/10/100/1000, final
threshold 3.0902, population 100000, and the known synthetic distribution.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .configs import EmConfig, IntegrationConfig, OptConfig
from .gmm import GmmModel, fit_gmm, select_components
from .io import load_model, load_score_table
from .objective import PipelineSpec, Stage
from .optimizer import BudgetSpec, OptimizationResult, optimize_budgeted, optimize_joint
from .synthetic import (
    SYNTHETIC_COLUMNS,
    SYNTHETIC_COSTS,
    SYNTHETIC_FINAL_THRESHOLD,
    synthetic_model,
)
from .tables import ScoreTable


@dataclass(frozen=True)
class BudgetedMode:
    budget: float


@dataclass(frozen=True)
class JointMode:
    alpha: float

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must be in [0, 1], got {self.alpha}")


@dataclass(frozen=True)
class KnownDistribution:
    model: GmmModel


@dataclass(frozen=True)
class FitDistribution:
    path: str
    train_fraction: float = 0.04
    k: int | str = "auto"
    k_max: int = 5

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError("train_fraction must be in (0, 1)")
        if isinstance(self.k, str) and self.k != "auto":
            raise ValueError(f"k must be an integer or 'auto', got {self.k!r}")


@dataclass(frozen=True)
class CampaignConfig:
    pipeline: PipelineSpec
    mode: BudgetedMode | JointMode
    distribution: KnownDistribution | FitDistribution
    integration: IntegrationConfig = IntegrationConfig()
    optimizer: OptConfig = OptConfig()
    em: EmConfig = EmConfig()
    seed: int = 0


def paper_synthetic_pipeline(population: int = 100_000) -> PipelineSpec:
    stages = tuple(
        Stage(name, cost, col)
        for col, (name, cost) in enumerate(zip(SYNTHETIC_COLUMNS, SYNTHETIC_COSTS))
    )
    return PipelineSpec(stages, SYNTHETIC_FINAL_THRESHOLD, population)


def split_table(
    table: ScoreTable, train_fraction: float, seed: int
) -> tuple[ScoreTable, ScoreTable]:
    """Disjoint (train, eval) split, reproducible from the seed."""
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must be in (0, 1)")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(table.n_rows)
    n_train = max(1, int(round(train_fraction * table.n_rows)))
    if n_train >= table.n_rows:
        raise ValueError("train fraction leaves no evaluation rows")
    return table.select_rows(perm[:n_train]), table.select_rows(perm[n_train:])


def _parse_pipeline(data: dict) -> PipelineSpec:
    stages = tuple(
        Stage(str(s["name"]), float(s["cost"]), int(s["column"]))
        for s in data["stages"]
    )
    return PipelineSpec(
        stages, float(data["final_threshold"]), int(data["population"])
    )


def _parse_mode(data: dict) -> BudgetedMode | JointMode:
    if set(data) == {"budgeted"}:
        return BudgetedMode(float(data["budgeted"]["budget"]))
    if set(data) == {"joint"}:
        return JointMode(float(data["joint"]["alpha"]))
    raise ValueError("mode must contain exactly one of 'budgeted' or 'joint'")


def _parse_distribution(data: dict, base_dir: Path):
    if set(data) == {"known"}:
        known = data["known"]
        if "path" in known:
            return KnownDistribution(load_model(base_dir / known["path"]))
        if "rho" in known:
            return KnownDistribution(synthetic_model(float(known["rho"])))
        raise ValueError("known distribution needs 'path' or 'rho'")
    if set(data) == {"fit"}:
        fit = dict(data["fit"])
        if "path" not in fit:
            raise ValueError("fit distribution needs 'path' to a score table")
        k = fit.get("k", "auto")
        return FitDistribution(
            path=str(base_dir / fit["path"]),
            train_fraction=float(fit.get("train_fraction", 0.04)),
            k=k if k == "auto" else int(k),
            k_max=int(fit.get("k_max", 5)),
        )
    raise ValueError("distribution must contain exactly one of 'known' or 'fit'")


_CAMPAIGN_KEYS = {
    "preset", "rho", "population", "pipeline", "mode", "distribution",
    "integration", "optimizer", "em", "seed",
}


def parse_campaign(data: dict, base_dir: Path | str = ".") -> CampaignConfig:
    base_dir = Path(base_dir)
    data = dict(data)
    unknown = set(data) - _CAMPAIGN_KEYS
    if unknown:
        raise ValueError(f"unknown campaign keys: {sorted(unknown)}")
    if "mode" not in data:
        raise ValueError("campaign config needs a 'mode'")
    seed = int(data.get("seed", 0))
    if data.get("preset") == "paper-synthetic":
        rho = float(data.get("rho", 0.8))
        if "pipeline" in data:
            pipeline = _parse_pipeline(data["pipeline"])
        else:
            pipeline = paper_synthetic_pipeline(int(data.get("population", 100_000)))
        if "distribution" in data:
            distribution = _parse_distribution(data["distribution"], base_dir)
        else:
            distribution = KnownDistribution(synthetic_model(rho))
    elif "preset" in data:
        raise ValueError(f"unknown preset {data['preset']!r}")
    else:
        for key in ("pipeline", "distribution"):
            if key not in data:
                raise ValueError(f"campaign config needs '{key}' (or a preset)")
        pipeline = _parse_pipeline(data["pipeline"])
        distribution = _parse_distribution(data["distribution"], base_dir)
    try:
        integ = IntegrationConfig(**{"seed": seed, **data.get("integration", {})})
        opt = OptConfig(**{"seed": seed, **_tupled(data.get("optimizer", {}))})
        em = EmConfig(**{"seed": seed, **data.get("em", {})})
    except TypeError as exc:
        raise ValueError(f"bad config section: {exc}") from exc
    return CampaignConfig(
        pipeline=pipeline,
        mode=_parse_mode(data["mode"]),
        distribution=distribution,
        integration=integ,
        optimizer=opt,
        em=em,
        seed=seed,
    )


def _tupled(opt_data: dict) -> dict:
    out = dict(opt_data)
    if "seed_grid" in out:
        out["seed_grid"] = tuple(out["seed_grid"])
    return out


def load_campaign(path) -> CampaignConfig:
    path = Path(path)
    return parse_campaign(
        json.loads(path.read_text(encoding="utf-8")), base_dir=path.parent
    )


def resolve_distribution(
    config: CampaignConfig,
) -> tuple[GmmModel, ScoreTable | None]:
    """The score model plus, for fitted distributions, the held-out rows."""
    dist = config.distribution
    if isinstance(dist, KnownDistribution):
        return dist.model, None
    table = load_score_table(dist.path)
    train, holdout = split_table(table, dist.train_fraction, config.seed)
    if dist.k == "auto":
        _, model = select_components(train, dist.k_max, config.em)
    else:
        model = fit_gmm(train, int(dist.k), config.em)
    return model, holdout


def run_campaign(config: CampaignConfig) -> OptimizationResult:
    model, _ = resolve_distribution(config)
    if isinstance(config.mode, BudgetedMode):
        return optimize_budgeted(
            model,
            config.pipeline,
            BudgetSpec(config.mode.budget),
            config.optimizer,
            config.integration,
        )
    return optimize_joint(
        model,
        config.pipeline,
        config.mode.alpha,
        config.optimizer,
        config.integration,
    )


def effective_config_dict(config: CampaignConfig) -> dict:
    """Fully resolved settings, for echoing at the start of every run."""
    if isinstance(config.mode, BudgetedMode):
        mode = {"budgeted": {"budget": config.mode.budget}}
    else:
        mode = {"joint": {"alpha": config.mode.alpha}}
    if isinstance(config.distribution, KnownDistribution):
        dist = {
            "known": {
                "columns": list(config.distribution.model.column_names),
                "components": config.distribution.model.n_components,
            }
        }
    else:
        dist = {
            "fit": {
                "path": config.distribution.path,
                "train_fraction": config.distribution.train_fraction,
                "k": config.distribution.k,
            }
        }
    return {
        "pipeline": {
            "stages": [
                {"name": s.name, "cost": s.cost, "column": s.column}
                for s in config.pipeline.stages
            ],
            "final_threshold": config.pipeline.final_threshold,
            "population": config.pipeline.population,
        },
        "mode": mode,
        "distribution": dist,
        "integration": {
            "n_points": config.integration.n_points,
            "n_randomizations": config.integration.n_randomizations,
            "seed": config.integration.seed,
        },
        "optimizer": {
            "seed_grid": list(config.optimizer.seed_grid),
            "polish_iters": config.optimizer.polish_iters,
            "penalty_mu": config.optimizer.penalty_mu,
            "seed": config.optimizer.seed,
            "threads": config.optimizer.threads,
        },
        "seed": config.seed,
    }
