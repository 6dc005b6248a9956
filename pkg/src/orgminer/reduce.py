"""Pairwise association over mixed attribute types and redundancy pruning.

Measures, all on a common [0, 1] scale:

* numeric / numeric          -> |Pearson r|
* categorical / categorical  -> Cramer's V, sqrt(chi2 / (n * (min(r, c) - 1)))
* numeric / categorical      -> correlation ratio eta, sqrt(SS_between / SS_total)

Binary and ordinal attributes are treated as categorical here.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dataset import Dataset
from .errors import IncompleteData, UnknownAttribute

PEARSON = "pearson"
CRAMERS_V = "cramers_v"
CORRELATION_RATIO = "correlation_ratio"


def _codes(values: list) -> np.ndarray:
    levels = {v: i for i, v in enumerate(sorted(set(values)))}
    return np.array([levels[v] for v in values], dtype=np.int64)


def pearson_abs(x: np.ndarray, y: np.ndarray) -> float:
    x = np.asarray(x, dtype=float) - np.mean(x)
    y = np.asarray(y, dtype=float) - np.mean(y)
    sxx = float(x @ x)
    syy = float(y @ y)
    if sxx == 0.0 or syy == 0.0:
        return 0.0
    return min(1.0, abs(float(x @ y)) / np.sqrt(sxx * syy))


def contingency(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    table = np.zeros((a.max() + 1, b.max() + 1), dtype=np.int64)
    np.add.at(table, (a, b), 1)
    return table


def cramers_v_from_table(table: np.ndarray) -> float:
    table = np.asarray(table, dtype=float)
    table = table[table.sum(axis=1) > 0][:, table.sum(axis=0) > 0]
    r, c = table.shape
    if min(r, c) < 2:
        return 0.0
    n = table.sum()
    expected = np.outer(table.sum(axis=1), table.sum(axis=0)) / n
    chi2 = float(((table - expected) ** 2 / expected).sum())
    return min(1.0, float(np.sqrt(chi2 / (n * (min(r, c) - 1)))))


def cramers_v(a: list, b: list) -> float:
    return cramers_v_from_table(contingency(_codes(a), _codes(b)))


def correlation_ratio(categories: list, values: np.ndarray) -> float:
    y = np.asarray(values, dtype=float)
    codes = _codes(categories)
    total = float(((y - y.mean()) ** 2).sum())
    if total == 0.0:
        return 0.0
    counts = np.bincount(codes)
    sums = np.bincount(codes, weights=y)
    nz = counts > 0
    group_means = sums[nz] / counts[nz]
    between = float((counts[nz] * (group_means - y.mean()) ** 2).sum())
    return min(1.0, float(np.sqrt(between / total)))


@dataclass
class AssociationMatrix:
    names: list[str]
    scores: np.ndarray
    measures: list[list[str]]
    constant: list[str] = field(default_factory=list)

    def score(self, a: str, b: str) -> float:
        return float(self.scores[self.names.index(a), self.names.index(b)])

    def measure(self, a: str, b: str) -> str:
        return self.measures[self.names.index(a)][self.names.index(b)]

    def to_dict(self) -> dict:
        return {
            "names": self.names,
            "scores": [[round(float(v), 6) for v in row] for row in self.scores],
            "measures": self.measures,
            "constant_columns": self.constant,
        }


def association_matrix(dataset: Dataset) -> AssociationMatrix:
    """Symmetric association scores for every attribute pair of a complete dataset.

    Zero-variance columns score 0 against every other column and are listed in
    ``constant``; the diagonal is always 1.
    """
    if not dataset.is_complete():
        raise IncompleteData("association_matrix needs a complete dataset; impute first")
    if dataset.n_rows < 2:
        raise IncompleteData("association_matrix needs at least 2 rows")
    specs = dataset.codebook.attributes
    names = [s.name for s in specs]
    p = len(specs)
    cols = []
    constant = []
    for s in specs:
        col = dataset.column(s.name)
        if s.is_numeric:
            cols.append(np.array(col, dtype=float))
        else:
            cols.append(_codes(col))
        if len(set(col)) < 2:
            constant.append(s.name)
    scores = np.eye(p)
    measures = [[""] * p for _ in range(p)]
    for i in range(p):
        measures[i][i] = PEARSON if specs[i].is_numeric else CRAMERS_V
        for j in range(i + 1, p):
            ni, nj = specs[i].is_numeric, specs[j].is_numeric
            if ni and nj:
                m, v = PEARSON, pearson_abs(cols[i], cols[j])
            elif not ni and not nj:
                m, v = CRAMERS_V, cramers_v_from_table(contingency(cols[i], cols[j]))
            elif ni:
                m, v = CORRELATION_RATIO, correlation_ratio(list(cols[j]), cols[i])
            else:
                m, v = CORRELATION_RATIO, correlation_ratio(list(cols[i]), cols[j])
            scores[i, j] = scores[j, i] = v
            measures[i][j] = measures[j][i] = m
    return AssociationMatrix(names, scores, measures, constant)


@dataclass(frozen=True)
class Drop:
    dropped: str
    retained: str
    score: float


@dataclass
class ReductionReport:
    threshold: float
    drops: list[Drop]
    surviving: list[str]

    @property
    def dropped(self) -> list[str]:
        return [d.dropped for d in self.drops]

    def to_dict(self) -> dict:
        return {
            "threshold": self.threshold,
            "n_before": len(self.surviving) + len(self.drops),
            "n_after": len(self.surviving),
            "drops": [
                {"dropped": d.dropped, "retained": d.retained, "score": round(d.score, 6)}
                for d in self.drops
            ],
            "surviving": self.surviving,
            "deleted_similar_factors": [
                f"{i}. The {d.dropped} variable is correlated with the {d.retained} variable "
                f"(correlation={d.score:.3f})."
                for i, d in enumerate(self.drops, 1)
            ],
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "ReductionReport":
        return cls(
            threshold=payload["threshold"],
            drops=[Drop(d["dropped"], d["retained"], d["score"]) for d in payload["drops"]],
            surviving=list(payload["surviving"]),
        )


def prune_redundant(matrix: AssociationMatrix, threshold: float = 0.4) -> ReductionReport:
    """Greedy redundancy pruning.

    Pairs are visited in descending score order (ties in attribute order). For
    each pair at or above ``threshold`` whose members both survive, the member
    with the larger mean association to the other survivors is dropped; on a tie
    the later attribute goes.
    """
    names = matrix.names
    s = matrix.scores
    p = len(names)
    pairs = [(i, j) for i in range(p) for j in range(i + 1, p) if s[i, j] >= threshold]
    pairs.sort(key=lambda ij: (-s[ij], ij))
    alive = np.ones(p, dtype=bool)
    drops = []
    for i, j in pairs:
        if not (alive[i] and alive[j]):
            continue

        def mean_assoc(a: int) -> float:
            others = alive.copy()
            others[a] = False
            return float(s[a, others].mean()) if others.any() else 0.0

        mi, mj = mean_assoc(i), mean_assoc(j)
        victim, keeper = (i, j) if mi > mj else (j, i)
        alive[victim] = False
        drops.append(Drop(names[victim], names[keeper], float(s[i, j])))
    surviving = [n for n, a in zip(names, alive) if a]
    return ReductionReport(threshold, drops, surviving)


def apply_reduction(dataset: Dataset, report: ReductionReport) -> Dataset:
    missing = [d for d in report.dropped if d not in dataset.codebook]
    if missing:
        raise UnknownAttribute(f"reduction drops attributes absent from dataset: {missing}")
    if not report.drops:
        return dataset
    return dataset.drop_columns(report.dropped)
