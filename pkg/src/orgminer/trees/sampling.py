"""Stratified holdout and k-fold index generation."""

from __future__ import annotations

from typing import Sequence

import numpy as np


def _by_class(labels: Sequence) -> list[np.ndarray]:
    labels = list(labels)
    return [
        np.array([i for i, v in enumerate(labels) if v == c], dtype=np.int64)
        for c in sorted(set(labels), key=str)
    ]


def stratified_folds(labels: Sequence, folds: int, seed: int = 0) -> list[np.ndarray]:
    """Partition row indices into ``folds`` groups with near-equal class shares.

    Within each class the rows are shuffled and dealt round-robin; the dealing
    position carries over between classes so fold sizes differ by at most one.
    """
    if folds < 2:
        raise ValueError("need at least 2 folds")
    rng = np.random.default_rng(seed)
    buckets: list[list[int]] = [[] for _ in range(folds)]
    pos = 0
    for members in _by_class(labels):
        for i in rng.permutation(members):
            buckets[pos % folds].append(int(i))
            pos += 1
    return [np.array(sorted(b), dtype=np.int64) for b in buckets]


def stratified_split(labels: Sequence, test_fraction: float = 0.3, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """(train, test) row indices holding out about ``test_fraction`` of every class."""
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must lie strictly between 0 and 1")
    rng = np.random.default_rng(seed)
    train: list[int] = []
    test: list[int] = []
    for members in _by_class(labels):
        shuffled = rng.permutation(members)
        cut = int(round(test_fraction * len(shuffled)))
        test.extend(int(i) for i in shuffled[:cut])
        train.extend(int(i) for i in shuffled[cut:])
    return np.array(sorted(train), dtype=np.int64), np.array(sorted(test), dtype=np.int64)
