"""Empirical execution of screening policies over realized score tables.

The simulator is the ground-truth counterpart of the analytic objective:
rows are filtered stage by stage, every row entering a stage is charged that
stage's cost, and the rows surviving the final fixed threshold count as
detected. Savings compare the per-detection cost against screening the whole
table with the final stage alone.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ColumnMissing, EmptyTable, LengthMismatch, NoLabels
from .objective import PipelineSpec, Policy
from .optimizer import BudgetCurve, BudgetPoint, _keep_count
from .tables import ScoreTable


@dataclass(frozen=True)
class Metrics:
    accuracy: float | None
    sensitivity: float | None
    specificity: float | None
    f1: float | None

    def to_json_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "sensitivity": self.sensitivity,
            "specificity": self.specificity,
            "f1": self.f1,
        }


@dataclass(frozen=True)
class SimReport:
    """Outcome of running one policy (or the top-fraction baseline)."""

    survivors_per_stage: tuple[int, ...]
    detected: int
    total_cost: float
    effective_cost: float | None
    savings_vs_reference: float | None
    metrics: Metrics | None
    policy_used: Policy | float
    detected_mask: np.ndarray | None = field(
        default=None, repr=False, compare=False
    )

    def to_json_dict(self) -> dict:
        if isinstance(self.policy_used, Policy):
            policy_used = {"policy": list(self.policy_used.thresholds)}
        else:
            policy_used = {"baseline_top_fraction": self.policy_used}
        return {
            "survivors_per_stage": list(self.survivors_per_stage),
            "detected": self.detected,
            "total_cost": self.total_cost,
            "effective_cost": self.effective_cost,
            "savings_vs_reference": self.savings_vs_reference,
            "metrics": self.metrics.to_json_dict() if self.metrics else None,
            "policy_used": policy_used,
        }


def _check_table(table: ScoreTable, spec: PipelineSpec) -> None:
    if table.n_rows == 0:
        raise EmptyTable("simulation needs at least one row")
    for stage in spec.stages:
        if stage.column >= table.dim:
            raise ColumnMissing(
                f"stage {stage.name!r}: table has no column index {stage.column}"
            )


def _reference_effective_cost(table: ScoreTable, spec: PipelineSpec) -> float | None:
    """Per-detection cost of screening everything with the final stage only."""
    final = spec.final_stage
    ref_detected = int(
        np.sum(table.column(final.column) >= spec.final_threshold)
    )
    if ref_detected == 0:
        return None
    return final.cost * table.n_rows / ref_detected


def _assemble(
    table: ScoreTable,
    spec: PipelineSpec,
    survivors: list[int],
    alive: np.ndarray,
    policy_used: Policy | float,
) -> SimReport:
    detected = int(alive.sum())
    total_cost = float(
        sum(s.cost * n for s, n in zip(spec.stages, survivors))
    )
    effective = total_cost / detected if detected > 0 else None
    ref = _reference_effective_cost(table, spec)
    savings = None
    if effective is not None and ref is not None:
        savings = 1.0 - effective / ref
    metrics = _metrics_from_mask(alive, table.labels) if table.labels is not None else None
    return SimReport(
        survivors_per_stage=tuple(survivors),
        detected=detected,
        total_cost=total_cost,
        effective_cost=effective,
        savings_vs_reference=savings,
        metrics=metrics,
        policy_used=policy_used,
        detected_mask=alive,
    )


def run_policy(table: ScoreTable, spec: PipelineSpec, policy: Policy) -> SimReport:
    """Filter the table stage by stage with the given thresholds."""
    _check_table(table, spec)
    if len(policy) != spec.n_stages - 1:
        raise LengthMismatch(
            f"policy has {len(policy)} thresholds, pipeline needs {spec.n_stages - 1}"
        )
    alive = np.ones(table.n_rows, dtype=bool)
    survivors = []
    thresholds = list(policy.thresholds) + [spec.final_threshold]
    for stage, thr in zip(spec.stages, thresholds):
        survivors.append(int(alive.sum()))
        alive = alive & (table.column(stage.column) >= thr)
    return _assemble(table, spec, survivors, alive, policy)


def run_baseline(
    table: ScoreTable, spec: PipelineSpec, top_fraction: float
) -> SimReport:
    """Keep the top fraction of survivors at each non-final stage, then
    apply the final threshold; cutoff ties all pass."""
    _check_table(table, spec)
    if not 0.0 < top_fraction <= 1.0:
        raise ValueError(f"top_fraction must be in (0, 1], got {top_fraction}")
    alive = np.ones(table.n_rows, dtype=bool)
    survivors = []
    for stage in spec.stages[:-1]:
        survivors.append(int(alive.sum()))
        if top_fraction == 1.0:
            continue
        scores = table.rows[alive, stage.column]
        keep = _keep_count(top_fraction, scores.size)
        thr = np.partition(scores, scores.size - keep)[scores.size - keep]
        alive = alive & (table.column(stage.column) >= thr)
    survivors.append(int(alive.sum()))
    alive = alive & (table.column(spec.final_stage.column) >= spec.final_threshold)
    return _assemble(table, spec, survivors, alive, top_fraction)


def _ratio(num: int, den: int) -> float | None:
    return num / den if den > 0 else None


def _metrics_from_mask(predicted: np.ndarray, labels: np.ndarray) -> Metrics:
    pos = labels == 1
    tp = int(np.sum(predicted & pos))
    fp = int(np.sum(predicted & ~pos))
    fn = int(np.sum(~predicted & pos))
    tn = int(np.sum(~predicted & ~pos))
    return Metrics(
        accuracy=_ratio(tp + tn, tp + fp + fn + tn),
        sensitivity=_ratio(tp, tp + fn),
        specificity=_ratio(tn, tn + fp),
        f1=_ratio(2 * tp, 2 * tp + fp + fn),
    )


def classification_metrics(
    report: SimReport, table: ScoreTable
) -> tuple[float | None, float | None, float | None, float | None]:
    """(accuracy, sensitivity, specificity, f1) treating detected rows as
    predicted positives; rows discarded mid-pipeline are predicted negative.
    Undefined ratios come back as None."""
    if table.labels is None:
        raise NoLabels("table has no labels")
    mask = report.detected_mask
    if mask is None or mask.shape != (table.n_rows,):
        raise ValueError("report was not produced from this table")
    m = _metrics_from_mask(mask, table.labels)
    return m.accuracy, m.sensitivity, m.specificity, m.f1


def attach_empirical(
    curve: BudgetCurve, table: ScoreTable, spec: PipelineSpec
) -> BudgetCurve:
    """Fill each curve point's empirical detection count by simulation."""
    points = []
    for p in curve.points:
        detected = (
            run_policy(table, spec, p.policy).detected
            if p.expected_detected > 0.0
            else 0
        )
        points.append(
            BudgetPoint(p.budget, p.expected_detected, p.policy, detected)
        )
    return BudgetCurve(tuple(points))
