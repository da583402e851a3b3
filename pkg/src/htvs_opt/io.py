"""File formats: score-table CSV, mixture-model JSON, and report emission.

Score tables round-trip exactly (shortest-repr floats). Reports are written
for consumption, not re-ingestion: keys sorted, floats fixed at 9 significant
digits, so identical inputs always produce identical bytes. Infinities are
spelled ``-inf``/``inf``: bare tokens in CSV, strings in JSON (which cannot
carry them natively).
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .errors import DuplicateColumn, NonFiniteScore, ParseError
from .gmm import GmmComponent, GmmModel
from .objective import ObjectiveReport, Policy
from .optimizer import BudgetCurve, BudgetPoint, OptimizationResult
from .simulator import SimReport
from .tables import ScoreTable


# ---------------------------------------------------------------------------
# Score tables (CSV)
# ---------------------------------------------------------------------------

def load_score_table(path) -> ScoreTable:
    """Parse a score-table CSV: header ``id,<stage...>[,label]``."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(1, "empty file") from None
        if not header or header[0] != "id":
            raise ParseError(1, "first column must be 'id'")
        has_label = len(header) > 1 and header[-1] == "label"
        score_names = header[1 : -1 if has_label else len(header)]
        if not score_names:
            raise ParseError(1, "no score columns")
        if len(set(header)) != len(header):
            raise DuplicateColumn(f"duplicate column names in {header}")

        ids: list[str] = []
        rows: list[list[float]] = []
        labels: list[int] = []
        for lineno, record in enumerate(reader, start=2):
            if not record:
                continue
            if len(record) != len(header):
                raise ParseError(
                    lineno, f"expected {len(header)} fields, got {len(record)}"
                )
            ids.append(record[0])
            raw_scores = record[1 : 1 + len(score_names)]
            parsed = []
            for name, text in zip(score_names, raw_scores):
                try:
                    value = float(text)
                except ValueError:
                    raise ParseError(lineno, f"bad score {text!r} in column {name!r}") from None
                if not math.isfinite(value):
                    raise NonFiniteScore(lineno, f"non-finite score in column {name!r}")
                parsed.append(value)
            rows.append(parsed)
            if has_label:
                text = record[-1]
                if text not in ("0", "1"):
                    raise ParseError(lineno, f"label must be 0 or 1, got {text!r}")
                labels.append(int(text))
    if not rows:
        raise ParseError(2, "no data rows")
    return ScoreTable(
        tuple(score_names),
        np.array(rows),
        labels=np.array(labels, dtype=np.int8) if has_label else None,
        ids=tuple(ids),
    )


def write_score_table(table: ScoreTable, path) -> None:
    """Write a table in the shared CSV format with full float precision."""
    path = Path(path)
    header = ["id", *table.column_names]
    if table.labels is not None:
        header.append("label")
    ids = table.ids or tuple(str(i + 1) for i in range(table.n_rows))
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i in range(table.n_rows):
            record = [ids[i], *(repr(float(v)) for v in table.rows[i])]
            if table.labels is not None:
                record.append(str(int(table.labels[i])))
            writer.writerow(record)


# ---------------------------------------------------------------------------
# Mixture models (JSON)
# ---------------------------------------------------------------------------

def model_to_json_dict(model: GmmModel) -> dict:
    return {
        "dim": model.dim,
        "columns": list(model.column_names),
        "components": [
            {
                "weight": c.weight,
                "mean": c.mean.tolist(),
                "cov": c.covariance.tolist(),
            }
            for c in model.components
        ],
    }


def model_from_json_dict(data: dict) -> GmmModel:
    comps = tuple(
        GmmComponent(
            float(c["weight"]), np.array(c["mean"]), np.array(c["cov"])
        )
        for c in data["components"]
    )
    model = GmmModel(comps, tuple(data["columns"]))
    if model.dim != int(data["dim"]):
        raise ValueError(f"dim field {data['dim']} disagrees with components")
    return model


def save_model(model: GmmModel, path) -> None:
    Path(path).write_text(
        json.dumps(model_to_json_dict(model), indent=2), encoding="utf-8"
    )


def load_model(path) -> GmmModel:
    return model_from_json_dict(json.loads(Path(path).read_text(encoding="utf-8")))


# ---------------------------------------------------------------------------
# Reports (JSON / CSV)
# ---------------------------------------------------------------------------

def _round9(value):
    """Fix floats at 9 significant digits; infinities become strings."""
    if isinstance(value, float):
        if math.isinf(value):
            return "-inf" if value < 0 else "inf"
        if value != value:  # NaN never belongs in a report
            raise ValueError("cannot serialize NaN")
        return float(f"{value:.9g}")
    if isinstance(value, dict):
        return {k: _round9(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_round9(v) for v in value]
    return value


def _fmt_csv(value: float) -> str:
    return f"{value:.9g}"


def curve_to_csv_text(curve: BudgetCurve) -> str:
    n_thr = curve.n_thresholds
    with_empirical = any(p.empirical_detected is not None for p in curve.points)
    header = ["budget", "expected_detected"]
    header += [f"threshold_{i + 1}" for i in range(n_thr)]
    if with_empirical:
        header.append("empirical_detected")
    lines = [",".join(header)]
    for p in curve.points:
        fields = [_fmt_csv(p.budget), _fmt_csv(p.expected_detected)]
        fields += [_fmt_csv(t) for t in p.policy.thresholds]
        if with_empirical:
            fields.append(str(p.empirical_detected if p.empirical_detected is not None else 0))
        lines.append(",".join(fields))
    return "\n".join(lines) + "\n"


def read_budget_curve(path) -> BudgetCurve:
    text = Path(path).read_text(encoding="utf-8")
    lines = [ln for ln in text.splitlines() if ln]
    header = lines[0].split(",")
    if header[:2] != ["budget", "expected_detected"]:
        raise ParseError(1, "not a budget-curve CSV")
    with_empirical = header[-1] == "empirical_detected"
    n_thr = len(header) - 2 - (1 if with_empirical else 0)
    points = []
    for lineno, ln in enumerate(lines[1:], start=2):
        fields = ln.split(",")
        if len(fields) != len(header):
            raise ParseError(lineno, f"expected {len(header)} fields")
        policy = Policy(tuple(float(f) for f in fields[2 : 2 + n_thr]))
        empirical = int(fields[-1]) if with_empirical else None
        points.append(
            BudgetPoint(float(fields[0]), float(fields[1]), policy, empirical)
        )
    return BudgetCurve(tuple(points))


def report_to_json_text(result) -> str:
    if isinstance(result, (OptimizationResult, SimReport, ObjectiveReport)):
        payload = result.to_json_dict()
    elif isinstance(result, BudgetCurve):
        payload = {
            "points": [
                {
                    "budget": p.budget,
                    "expected_detected": p.expected_detected,
                    "policy": list(p.policy.thresholds),
                    **(
                        {"empirical_detected": p.empirical_detected}
                        if p.empirical_detected is not None
                        else {}
                    ),
                }
                for p in result.points
            ]
        }
    else:
        raise TypeError(f"cannot serialize {type(result).__name__}")
    return json.dumps(_round9(payload), sort_keys=True, indent=2) + "\n"


def write_report(result, path, format: str = "json") -> None:
    """Write a result artifact; identical inputs produce identical bytes."""
    path = Path(path)
    if format == "json":
        path.write_text(report_to_json_text(result), encoding="utf-8")
    elif format == "csv":
        if not isinstance(result, BudgetCurve):
            raise ValueError(f"CSV output supports budget curves, not {type(result).__name__}")
        path.write_text(curve_to_csv_text(result), encoding="utf-8")
    else:
        raise ValueError(f"unknown format {format!r}")
