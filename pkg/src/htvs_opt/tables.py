"""Score tables: one row per candidate, one column per screening stage."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DuplicateColumn, LengthMismatch, NonFiniteInput


@dataclass(frozen=True)
class ScoreTable:
    """Immutable matrix of per-candidate scores with optional labels/ids.

    ``labels``, when present, mark the true positive class with 1.
    """

    column_names: tuple[str, ...]
    rows: np.ndarray
    labels: np.ndarray | None = None
    ids: tuple[str, ...] | None = None

    def __post_init__(self):
        names = tuple(self.column_names)
        object.__setattr__(self, "column_names", names)
        if len(set(names)) != len(names):
            raise DuplicateColumn(f"duplicate column names in {names}")
        rows = np.asarray(self.rows, dtype=np.float64)
        if rows.ndim != 2:
            rows = rows.reshape(-1, len(names))
        if rows.shape[1] != len(names):
            raise LengthMismatch(
                f"rows have {rows.shape[1]} columns, expected {len(names)}"
            )
        if not np.all(np.isfinite(rows)):
            raise NonFiniteInput("score table contains non-finite entries")
        rows.setflags(write=False)
        object.__setattr__(self, "rows", rows)
        if self.labels is not None:
            labels = np.asarray(self.labels, dtype=np.int8)
            if labels.shape != (rows.shape[0],):
                raise LengthMismatch("labels must have one entry per row")
            if not np.all((labels == 0) | (labels == 1)):
                raise ValueError("labels must be 0 or 1")
            labels.setflags(write=False)
            object.__setattr__(self, "labels", labels)
        if self.ids is not None:
            ids = tuple(self.ids)
            if len(ids) != rows.shape[0]:
                raise LengthMismatch("ids must have one entry per row")
            object.__setattr__(self, "ids", ids)

    @property
    def n_rows(self) -> int:
        return self.rows.shape[0]

    @property
    def dim(self) -> int:
        return self.rows.shape[1]

    def column(self, index: int) -> np.ndarray:
        return self.rows[:, index]

    def select_rows(self, mask_or_index: np.ndarray) -> "ScoreTable":
        """New table containing only the given rows, preserving order."""
        rows = self.rows[mask_or_index]
        labels = self.labels[mask_or_index] if self.labels is not None else None
        ids = None
        if self.ids is not None:
            idx = np.arange(self.n_rows)[mask_or_index]
            ids = tuple(self.ids[i] for i in idx)
        return ScoreTable(self.column_names, rows, labels, ids)
