"""Data preparation: incomplete-row removal, mode/mean imputation, robust outlier scan."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .dataset import MISSING, Dataset
from .errors import AllMissingColumn

MAD_SCALE = 1.4826


@dataclass(frozen=True)
class ImputePolicy:
    # Both rules are fixed; the fields exist so reports can echo the policy.
    categorical_rule: str = "mode"
    numeric_rule: str = "mean"
    mode_tie_break: str = "lexicographic_smallest"


@dataclass(frozen=True)
class Imputation:
    row: int
    column: str
    value: Any


@dataclass
class OutlierReport:
    threshold: float
    flagged: dict[str, list[tuple[int, float, float]]] = field(default_factory=dict)
    mad_zero: list[str] = field(default_factory=list)

    @property
    def empty(self) -> bool:
        return not any(self.flagged.values())

    def to_dict(self) -> dict:
        return {
            "z_threshold": self.threshold,
            "flagged": {
                name: [{"row": r, "value": v, "robust_z": z} for r, v, z in items]
                for name, items in self.flagged.items()
            },
            "mad_zero_columns": list(self.mad_zero),
            "no_outliers": self.empty,
        }


def drop_incomplete(dataset: Dataset, max_missing_fraction: float = 0.5) -> Dataset:
    """Remove rows whose fraction of missing cells exceeds ``max_missing_fraction``."""
    width = len(dataset.codebook)
    keep = [
        i
        for i, row in enumerate(dataset.rows)
        if sum(v is MISSING for v in row) / width <= max_missing_fraction
    ]
    return dataset.take(keep)


def _mode(values: list[str]) -> str:
    counts = Counter(values)
    best = max(counts.values())
    return min(c for c, n in counts.items() if n == best)


def fill_values(dataset: Dataset, policy: ImputePolicy = ImputePolicy()) -> dict[str, Any]:
    """Per-column replacement value: mode for non-numeric columns, mean for numeric ones."""
    fills = {}
    for spec in dataset.codebook:
        observed = [v for v in dataset.column(spec.name) if v is not MISSING]
        if not observed:
            raise AllMissingColumn(spec.name)
        if spec.is_numeric:
            fills[spec.name] = float(sum(observed) / len(observed))
        else:
            fills[spec.name] = _mode(observed)
    return fills


def apply_fills(dataset: Dataset, fills: dict[str, Any]) -> tuple[Dataset, list[Imputation]]:
    names = dataset.names
    log = []
    rows = []
    for i, row in enumerate(dataset.rows):
        new = list(row)
        for j, v in enumerate(row):
            if v is MISSING:
                new[j] = fills[names[j]]
                log.append(Imputation(i, names[j], new[j]))
        rows.append(tuple(new))
    return Dataset(dataset.codebook, tuple(rows)), log


def impute(dataset: Dataset, policy: ImputePolicy = ImputePolicy()) -> Dataset:
    """Replace every missing cell by its column's mode (categories) or mean (numbers).

    Mode ties go to the lexicographically smallest category. Means are not rounded.
    Raises AllMissingColumn when a column has no observed value at all.
    """
    if dataset.is_complete():
        return dataset
    filled, _ = apply_fills(dataset, fill_values(dataset, policy))
    return filled


def outlier_scan(dataset: Dataset, z_threshold: float = 3.5) -> OutlierReport:
    report = OutlierReport(threshold=z_threshold)
    for spec in dataset.codebook:
        if not spec.is_numeric:
            continue
        col = dataset.column(spec.name)
        idx = [i for i, v in enumerate(col) if v is not MISSING]
        if not idx:
            continue
        x = np.array([col[i] for i in idx], dtype=float)
        med = np.median(x)
        mad = np.median(np.abs(x - med))
        if mad == 0:
            report.mad_zero.append(spec.name)
            continue
        z = np.abs(x - med) / (MAD_SCALE * mad)
        hits = [(idx[k], float(x[k]), float(z[k])) for k in np.flatnonzero(z > z_threshold)]
        report.flagged[spec.name] = hits
    return report


@dataclass
class PrepResult:
    dataset: Dataset
    dropped_rows: list[int]
    fills: dict[str, Any]
    imputations: list[Imputation]
    outliers: OutlierReport
    max_missing_fraction: float
    policy: ImputePolicy = ImputePolicy()

    def to_dict(self) -> dict:
        return {
            "max_missing_fraction": self.max_missing_fraction,
            "policy": {
                "categorical": self.policy.categorical_rule,
                "numeric": self.policy.numeric_rule,
                "mode_tie_break": self.policy.mode_tie_break,
            },
            "rows_in": self.dataset.n_rows + len(self.dropped_rows),
            "rows_out": self.dataset.n_rows,
            "dropped_rows": self.dropped_rows,
            "fill_values": self.fills,
            "imputations": [
                {"row": m.row, "column": m.column, "value": m.value} for m in self.imputations
            ],
            "outliers": self.outliers.to_dict(),
        }


def prepare(
    dataset: Dataset,
    max_missing_fraction: float = 0.5,
    z_threshold: float = 3.5,
    policy: ImputePolicy = ImputePolicy(),
) -> PrepResult:
    """Run the whole preparation stage and keep everything needed for the report.

    Imputation row indices refer to the dataset after incomplete rows were dropped.
    """
    width = len(dataset.codebook)
    dropped = [
        i
        for i, row in enumerate(dataset.rows)
        if sum(v is MISSING for v in row) / width > max_missing_fraction
    ]
    kept = drop_incomplete(dataset, max_missing_fraction)
    outliers = outlier_scan(kept, z_threshold)
    fills = fill_values(kept, policy)
    filled, log = apply_fills(kept, fills)
    return PrepResult(filled, dropped, fills, log, outliers, max_missing_fraction, policy)
