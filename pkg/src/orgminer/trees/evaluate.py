"""Accuracy scoring and the cross-validated algorithm comparison."""

from __future__ import annotations

from dataclasses import dataclass, field

from ..dataset import Dataset
from ..errors import EmptyTestSet, TargetMissing
from .growth import TreeParams, grow_tree
from .model import ALGORITHMS, DISPLAY_NAMES, Tree, predict
from .sampling import stratified_folds

HEADERS = ("Decision tree", "Accuracy")


def evaluate(tree: Tree, test: Dataset, target: str) -> float:
    """Fraction of ``test`` rows whose predicted label matches ``target``."""
    if test.n_rows == 0:
        raise EmptyTestSet("cannot evaluate on an empty test set")
    if target not in test.codebook:
        raise TargetMissing(f"target {target!r} is not in the test set")
    hits = sum(predict(tree, rec) == rec[target] for rec in test.records())
    return hits / test.n_rows


@dataclass
class ComparisonTable:
    rows: list[tuple[str, float]]
    algorithms: list[str]
    folds: int
    fold_accuracies: dict[str, list[float]] = field(default_factory=dict)

    @property
    def best(self) -> str:
        """Algorithm tag with the highest accuracy; earlier rows win ties."""
        scores = [pct for _, pct in self.rows]
        return self.algorithms[scores.index(max(scores))]

    def accuracy(self, algorithm: str) -> float:
        return self.rows[self.algorithms.index(algorithm)][1]

    def render(self) -> str:
        cells = [HEADERS] + [(name, f"{pct:.2f}%") for name, pct in self.rows]
        width = max(len(a) for a, _ in cells) + 2
        return "\n".join(f"{a:<{width}}{b}" for a, b in cells)

    def to_markdown(self) -> str:
        lines = [f"| {HEADERS[0]} | {HEADERS[1]} |", "|---|---|"]
        lines += [f"| {name} | {pct:.2f}% |" for name, pct in self.rows]
        return "\n".join(lines)

    def to_dict(self) -> dict:
        return {
            "headers": list(HEADERS),
            "rows": [{"algorithm": a, "name": n, "accuracy": p} for a, (n, p) in zip(self.algorithms, self.rows)],
            "folds": self.folds,
            "best": self.best,
            "fold_accuracies": self.fold_accuracies,
        }


def compare_algorithms(
    dataset: Dataset,
    target: str,
    params: TreeParams = TreeParams(),
    seed: int = 0,
    folds: int = 5,
    algorithms: tuple[str, ...] = ALGORITHMS,
) -> ComparisonTable:
    """Stratified k-fold accuracy of each algorithm, pooled over all held-out rows."""
    labels = dataset.column(target) if target in dataset.codebook else None
    if labels is None:
        raise TargetMissing(f"target {target!r} is not an attribute of the dataset")
    splits = stratified_folds(labels, folds, seed)
    rows = []
    per_fold = {}
    for algorithm in algorithms:
        hits = 0
        accs = []
        for held in splits:
            if not len(held):
                continue
            held_set = set(held.tolist())
            train = dataset.take([i for i in range(dataset.n_rows) if i not in held_set])
            test = dataset.take(held.tolist())
            tree = grow_tree(train, target, algorithm, params, seed)
            acc = evaluate(tree, test, target)
            hits += round(acc * test.n_rows)
            accs.append(acc)
        rows.append((DISPLAY_NAMES[algorithm], round(100.0 * hits / dataset.n_rows, 2)))
        per_fold[algorithm] = accs
    return ComparisonTable(rows, list(algorithms), folds, per_fold)
