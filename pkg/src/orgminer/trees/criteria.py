"""Split criteria: Gini impurity, gain ratio, Pearson chi-square, Bonferroni multipliers."""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np
from scipy import stats

from ..errors import DegenerateTable, EmptyNode, NonPartition


def gini(class_counts: Sequence[int]) -> float:
    """1 - sum(p_i^2) over the class proportions of a node."""
    counts = np.asarray(class_counts, dtype=float)
    total = counts.sum()
    if total <= 0:
        raise EmptyNode("gini of an empty node")
    p = counts / total
    return float(1.0 - (p * p).sum())


def entropy(class_counts: Sequence[int]) -> float:
    counts = np.asarray(class_counts, dtype=float)
    total = counts.sum()
    if total <= 0:
        raise EmptyNode("entropy of an empty node")
    p = counts[counts > 0] / total
    return float(-(p * np.log2(p)).sum())


def information_gain(parent_counts: Sequence[int], child_counts_list: Sequence[Sequence[int]]) -> tuple[float, float]:
    """(information gain, split information) of a partition, both in bits."""
    parent = np.asarray(parent_counts, dtype=np.int64)
    children = [np.asarray(c, dtype=np.int64) for c in child_counts_list]
    if not children or any((c < 0).any() for c in children):
        raise NonPartition("children must be non-negative count vectors")
    if any(c.shape != parent.shape for c in children) or not np.array_equal(sum(children), parent):
        raise NonPartition("child class counts do not add up to the parent's")
    n = parent.sum()
    sizes = np.array([c.sum() for c in children], dtype=float)
    nonempty = [c for c in children if c.sum() > 0]
    gain = entropy(parent) - sum(c.sum() / n * entropy(c) for c in nonempty)
    w = sizes[sizes > 0] / n
    split_info = float(-(w * np.log2(w)).sum())
    return max(gain, 0.0), split_info


def gain_ratio(parent_counts: Sequence[int], child_counts_list: Sequence[Sequence[int]]) -> float:
    gain, split_info = information_gain(parent_counts, child_counts_list)
    if split_info <= 0.0:
        return 0.0
    return gain / split_info


def chi_square(contingency) -> tuple[float, float]:
    """Pearson chi-square test of independence on an r x c count table.

    Returns (statistic, p-value) with (r - 1)(c - 1) degrees of freedom.
    """
    table = np.asarray(contingency, dtype=float)
    if table.ndim != 2 or table.shape[0] < 2 or table.shape[1] < 2:
        raise DegenerateTable(f"need at least a 2 x 2 table, got shape {table.shape}")
    if (table < 0).any():
        raise DegenerateTable("negative count in contingency table")
    rows = table.sum(axis=1)
    cols = table.sum(axis=0)
    if (rows <= 0).any() or (cols <= 0).any():
        raise DegenerateTable("contingency table has an empty row or column")
    expected = np.outer(rows, cols) / table.sum()
    stat = float(((table - expected) ** 2 / expected).sum())
    dof = (table.shape[0] - 1) * (table.shape[1] - 1)
    return stat, float(stats.chi2.sf(stat, dof))


def pairwise_p_value(a: np.ndarray, b: np.ndarray) -> float:
    """p-value of the 2 x K table [a; b] after dropping empty classes; 1.0 when
    fewer than two classes remain (the rows cannot differ)."""
    table = np.vstack([a, b])
    table = table[:, table.sum(axis=0) > 0]
    if table.shape[1] < 2:
        return 1.0
    return chi_square(table)[1]


def bonferroni_nominal(c: int, r: int) -> float:
    """Ways to merge c nominal categories into r groups (Stirling number of the second kind)."""
    return float(sum((-1) ** i * (r - i) ** c / (math.factorial(i) * math.factorial(r - i)) for i in range(r)))


def bonferroni_ordinal(c: int, r: int) -> float:
    return float(math.comb(c - 1, r - 1))
