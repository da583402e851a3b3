"""Pydantic request/response models for the HTTP service.

Wire formats mirror the file formats: model payloads match the mixture JSON
schema, report payloads match the report JSON field names, and infinite
thresholds travel as the strings "-inf"/"inf" (plain JSON cannot carry
infinities).
"""

from __future__ import annotations

import math

from pydantic import BaseModel, Field, model_validator

_INF_TOKENS = {"-inf": -math.inf, "inf": math.inf, "+inf": math.inf}


def threshold_in(value) -> float:
    if isinstance(value, str):
        if value not in _INF_TOKENS:
            raise ValueError(f"bad threshold token {value!r}")
        return _INF_TOKENS[value]
    return float(value)


def threshold_out(value: float) -> float | str:
    if math.isinf(value):
        return "-inf" if value < 0 else "inf"
    return value


class TablePayload(BaseModel):
    columns: list[str]
    rows: list[list[float]]
    ids: list[str] | None = None
    labels: list[int] | None = None


class ComponentPayload(BaseModel):
    weight: float
    mean: list[float]
    cov: list[list[float]]


class ModelPayload(BaseModel):
    dim: int
    columns: list[str]
    components: list[ComponentPayload]


class StagePayload(BaseModel):
    name: str
    cost: float
    column: int


class PipelinePayload(BaseModel):
    stages: list[StagePayload]
    final_threshold: float
    population: int


class IntegrationPayload(BaseModel):
    n_points: int = 8192
    n_randomizations: int = 16
    seed: int = 0


class OptimizerPayload(BaseModel):
    seed_grid: list[float] | None = None
    polish_iters: int = 200
    penalty_mu: float = 10.0
    seed: int = 0


class GenerateRequest(BaseModel):
    rho: float
    n: int = Field(ge=1)
    seed: int = Field(default=0, ge=0)


class FitRequest(BaseModel):
    table: TablePayload
    k: int | None = Field(default=None, ge=1)
    k_max: int = Field(default=5, ge=1)
    seed: int = Field(default=0, ge=0)


class FitResponse(BaseModel):
    model: ModelPayload
    k: int
    log_likelihood: float
    bic: list[tuple[int, float]] | None = None


class BudgetedModePayload(BaseModel):
    budget: float


class JointModePayload(BaseModel):
    alpha: float = Field(ge=0.0, le=1.0)


class ModePayload(BaseModel):
    budgeted: BudgetedModePayload | None = None
    joint: JointModePayload | None = None

    @model_validator(mode="after")
    def exactly_one(self):
        if (self.budgeted is None) == (self.joint is None):
            raise ValueError("mode must set exactly one of 'budgeted' or 'joint'")
        return self


class OptimizeRequest(BaseModel):
    model: ModelPayload
    pipeline: PipelinePayload
    mode: ModePayload
    integration: IntegrationPayload = IntegrationPayload()
    optimizer: OptimizerPayload = OptimizerPayload()


class ObjectiveReportPayload(BaseModel):
    reward: float
    expected_counts: list[float]
    expected_total_cost: float
    relative_reward: float
    normalized_cost: float
    joint_value: float


class OptimizeResponse(BaseModel):
    policy: list[float | str]
    report: ObjectiveReportPayload
    feasible: bool
    evaluations: int


class SimulateRequest(BaseModel):
    table: TablePayload
    pipeline: PipelinePayload
    policy: list[float | str] | None = None
    baseline: float | None = Field(default=None, gt=0.0, le=1.0)

    @model_validator(mode="after")
    def exactly_one(self):
        if (self.policy is None) == (self.baseline is None):
            raise ValueError("set exactly one of 'policy' or 'baseline'")
        return self


class MetricsPayload(BaseModel):
    accuracy: float | None
    sensitivity: float | None
    specificity: float | None
    f1: float | None


class SimulateResponse(BaseModel):
    survivors_per_stage: list[int]
    detected: int
    total_cost: float
    effective_cost: float | None
    savings_vs_reference: float | None
    metrics: MetricsPayload | None
    policy_used: dict


class SweepRequest(BaseModel):
    model: ModelPayload
    pipeline: PipelinePayload
    budgets: list[float] = Field(min_length=1)
    integration: IntegrationPayload = IntegrationPayload()
    optimizer: OptimizerPayload = OptimizerPayload()
    table: TablePayload | None = None


class BudgetPointPayload(BaseModel):
    budget: float
    expected_detected: float
    policy: list[float | str]
    empirical_detected: int | None = None


class SweepResponse(BaseModel):
    points: list[BudgetPointPayload]
