"""Tree induction: CART (Gini), C4.5-style gain ratio, and CHAID, plus pruning."""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import stats

from ..dataset import Dataset
from ..errors import IncompleteData, TargetMissing, TargetNotCategorical
from .criteria import bonferroni_nominal, bonferroni_ordinal, chi_square, pairwise_p_value
from .model import ALGORITHMS, Node, Split, Tree
from .sampling import stratified_folds

EPS = 1e-12
MAX_EXHAUSTIVE = 12
# Confidence factor of the pessimistic error estimate.
CONFIDENCE_FACTOR = 0.25


@dataclass(frozen=True)
class TreeParams:
    max_depth: int = 10
    min_node_size: int = 5
    min_leaf: int = 2
    chaid_alpha: float = 0.05
    pruning: bool = True
    cv_folds: int = 5
    chaid_bins: int = 10
    value_subsets: bool = True

    def __post_init__(self):
        if self.max_depth < 1 or self.min_node_size < 1 or self.min_leaf < 1:
            raise ValueError("max_depth, min_node_size and min_leaf must be positive")
        if not 0.0 < self.chaid_alpha < 1.0:
            raise ValueError("chaid_alpha must lie strictly between 0 and 1")
        if self.cv_folds < 2 or self.chaid_bins < 2:
            raise ValueError("cv_folds and chaid_bins must be at least 2")

    def to_dict(self) -> dict:
        return {
            "max_depth": self.max_depth,
            "min_node_size": self.min_node_size,
            "min_leaf": self.min_leaf,
            "chaid_alpha": self.chaid_alpha,
            "pruning": self.pruning,
            "cv_folds": self.cv_folds,
            "chaid_bins": self.chaid_bins,
            "value_subsets": self.value_subsets,
        }


@dataclass
class _Feature:
    name: str
    kind: str  # nominal | ordinal | numeric
    categories: tuple[str, ...]
    values: np.ndarray


def _frame(dataset: Dataset, target: str) -> tuple[list[_Feature], np.ndarray, list[str]]:
    if target not in dataset.codebook:
        raise TargetMissing(f"target {target!r} is not an attribute of the dataset")
    tspec = dataset.codebook[target]
    if tspec.is_numeric:
        raise TargetNotCategorical(f"target {target!r} is numeric")
    if not dataset.is_complete():
        raise IncompleteData("tree induction needs a complete dataset; impute first")
    classes = list(tspec.categories)
    lookup = {c: i for i, c in enumerate(classes)}
    y = np.array([lookup[v] for v in dataset.column(target)], dtype=np.int64)
    features = []
    for spec in dataset.codebook:
        if spec.name == target:
            continue
        col = dataset.column(spec.name)
        if spec.is_numeric:
            features.append(_Feature(spec.name, "numeric", (), np.array(col, dtype=float)))
        else:
            codes = {c: i for i, c in enumerate(spec.categories)}
            kind = "ordinal" if spec.kind == "ordinal" else "nominal"
            features.append(
                _Feature(spec.name, kind, spec.categories, np.array([codes[v] for v in col], dtype=np.int64))
            )
    return features, y, classes


def _table(codes: np.ndarray, y: np.ndarray, n_codes: int, n_classes: int) -> np.ndarray:
    table = np.zeros((n_codes, n_classes), dtype=np.int64)
    np.add.at(table, (codes, y), 1)
    return table


def _weighted_gini(m: np.ndarray) -> np.ndarray:
    # Row-wise n * gini(row), i.e. n - sum(c^2) / n.
    n = m.sum(axis=1)
    return n - (m * m).sum(axis=1) / n


def _entropy_rows(m: np.ndarray) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    n = m.sum(axis=1, keepdims=True)
    p = np.divide(m, n, out=np.zeros_like(m), where=n > 0)
    logs = np.log2(p, out=np.zeros_like(p), where=p > 0)
    return -(p * logs).sum(axis=1)


@lru_cache(maxsize=None)
def _subset_masks(c: int) -> np.ndarray:
    # Every proper two-way partition once: category 0 always goes left.
    codes = np.arange(2 ** (c - 1) - 1)
    bits = (codes[:, None] >> np.arange(c - 1)[None, :]) & 1
    return np.hstack([np.ones((len(codes), 1), dtype=np.int64), bits]).astype(bool)


def _sorted_cuts(x: np.ndarray, y: np.ndarray, n_classes: int):
    # Cumulative class counts left of each admissible cut between distinct values.
    order = np.argsort(x, kind="stable")
    xs, ys = x[order], y[order]
    left = np.cumsum(np.eye(n_classes, dtype=np.int64)[ys], axis=0)[:-1]
    valid = np.flatnonzero(xs[:-1] < xs[1:])
    return xs, left[valid], valid


def _partition_scores(rows: np.ndarray, h_parent: float, n: int) -> tuple[float, float]:
    sizes = rows.sum(axis=1)
    w = sizes / n
    gain = h_parent - float((sizes * _entropy_rows(rows)).sum() / n)
    return gain, float(-(w * np.log2(w)).sum())


def subset_values(table: np.ndarray, h_parent: float) -> tuple[list[list[int]], float, float]:
    """Greedy value grouping for a multiway split on the rows of ``table``.

    Starting from one group per row, repeatedly merge the pair of groups whose
    union gives the best gain ratio, down to two groups. The stage with the
    highest gain ratio is kept (earlier, finer stages win ties). Returns the
    groups with that partition's (gain, split info).
    """
    table = np.asarray(table, dtype=np.int64)
    n = int(table.sum())
    groups = [[i] for i in range(table.shape[0])]
    rows = table.copy()
    gain, split_info = _partition_scores(rows, h_parent, n)
    ratio = gain / split_info if split_info > EPS else 0.0
    best = (ratio, [list(g) for g in groups], gain, split_info)
    while len(groups) > 2:
        g = len(groups)
        ii, jj = np.triu_indices(g, 1)
        merged = rows[ii] + rows[jj]
        sizes = rows.sum(axis=1).astype(float)
        ent = _entropy_rows(rows)
        msize = merged.sum(axis=1).astype(float)
        cond = float((sizes * ent).sum())
        pair_cond = cond - sizes[ii] * ent[ii] - sizes[jj] * ent[jj] + msize * _entropy_rows(merged)
        w = sizes / n
        wlog = -w * np.log2(w)
        mw = msize / n
        pair_info = wlog.sum() - wlog[ii] - wlog[jj] - mw * np.log2(mw)
        pair_gain = h_parent - pair_cond / n
        pair_ratio = np.where(pair_info > EPS, pair_gain / np.maximum(pair_info, EPS), 0.0)
        b = int(np.argmax(pair_ratio))
        i, j = int(ii[b]), int(jj[b])
        groups[i] = sorted(groups[i] + groups[j])
        rows[i] = rows[i] + rows[j]
        del groups[j]
        rows = np.delete(rows, j, axis=0)
        if pair_ratio[b] > best[0] + EPS:
            best = (float(pair_ratio[b]), [list(x) for x in groups], float(pair_gain[b]), float(pair_info[b]))
    return best[1], best[2], best[3]


def merge_categories(table: np.ndarray, alpha: float, ordinal: bool = False) -> tuple[list[list[int]], list[int]]:
    """CHAID merging on the rows of a category-by-class table.

    Repeatedly merges the pair of groups whose class distributions differ least
    (largest chi-square p-value) while that p-value exceeds ``alpha`` and more
    than two groups remain. Ordinal rows only merge with neighbours. Returns the
    groups of row indices and the group count after every step.
    """
    table = np.asarray(table, dtype=np.int64)
    groups = [[i] for i in range(table.shape[0])]
    rows = [table[i].copy() for i in range(table.shape[0])]
    trace = [len(groups)]
    while len(groups) > 2:
        if ordinal:
            pairs = [(i, i + 1) for i in range(len(groups) - 1)]
        else:
            pairs = [(i, j) for i in range(len(groups)) for j in range(i + 1, len(groups))]
        best_p, best_pair = -1.0, None
        for i, j in pairs:
            p = pairwise_p_value(rows[i], rows[j])
            if p > best_p + EPS:
                best_p, best_pair = p, (i, j)
        if best_p <= alpha:
            break
        i, j = best_pair
        groups[i] = sorted(groups[i] + groups[j])
        rows[i] = rows[i] + rows[j]
        del groups[j], rows[j]
        trace.append(len(groups))
    return groups, trace


def _quantile_bins(x: np.ndarray, n_bins: int) -> tuple[np.ndarray, np.ndarray]:
    thresholds = np.unique(np.quantile(x, np.linspace(0, 1, n_bins + 1)[1:-1]))
    while True:
        codes = np.searchsorted(thresholds, x, side="left")
        counts = np.bincount(codes, minlength=len(thresholds) + 1)
        empty = np.flatnonzero(counts == 0)
        if not len(empty):
            return thresholds, codes
        # Dropping the threshold above (or, for the top bin, below) an empty bin merges it away.
        thresholds = np.delete(thresholds, min(empty[0], len(thresholds) - 1))


class _Grower:
    def __init__(self, features: list[_Feature], y: np.ndarray, classes: list[str], algorithm: str, params: TreeParams):
        self.features = features
        self.y = y
        self.classes = classes
        self.k = len(classes)
        self.algorithm = algorithm
        self.params = params
        self.finder = {"cart": self._cart, "gain_ratio": self._gain_ratio, "chaid": self._chaid}[algorithm]

    def grow(self, idx: np.ndarray, depth: int = 0) -> Node:
        counts = np.bincount(self.y[idx], minlength=self.k)
        node = Node(counts.tolist(), self.classes[int(np.argmax(counts))])
        if depth >= self.params.max_depth or len(idx) < self.params.min_node_size:
            return node
        if np.count_nonzero(counts) <= 1:
            return node
        found = self.finder(idx, counts)
        if found is None:
            return node
        split, assign, p_value = found
        node.split = split
        node.p_value = p_value
        node.children = [self.grow(idx[assign == b], depth + 1) for b in range(split.n_branches)]
        return node

    # CART

    def _cart(self, idx, counts):
        n = len(idx)
        yi = self.y[idx]
        parent = n - float(counts @ counts) / n
        best = (EPS, None, None)
        for f in self.features:
            x = f.values[idx]
            if f.kind == "numeric":
                found = self._cart_numeric(f, x, yi, counts)
            else:
                found = self._cart_categorical(f, x, yi, counts)
            if found is not None and (parent - found[0]) / n > best[0] + EPS:
                best = ((parent - found[0]) / n, found[1], found[2])
        if best[1] is None:
            return None
        return best[1], best[2], None

    def _cart_numeric(self, f, x, yi, counts):
        xs, left, valid = _sorted_cuts(x, yi, self.k)
        if not len(valid):
            return None
        right = counts[None, :] - left
        cost = _weighted_gini(left) + _weighted_gini(right)
        b = int(np.argmin(cost))
        cut = valid[b]
        t = float((xs[cut] + xs[cut + 1]) / 2)
        return float(cost[b]), Split(f.name, "numeric", thresholds=(t,)), (x > t).astype(np.int64)

    def _cart_categorical(self, f, x, yi, counts):
        table = _table(x, yi, len(f.categories), self.k)
        present = np.flatnonzero(table.sum(axis=1) > 0)
        c = len(present)
        if c < 2:
            return None
        sub = table[present]
        observed = np.flatnonzero(counts > 0)
        if len(observed) == 2:
            share = sub[:, observed[0]] / sub.sum(axis=1)
            order = np.argsort(share, kind="stable")
            masks = np.zeros((c - 1, c), dtype=bool)
            for m in range(1, c):
                masks[m - 1, order[:m]] = True
        elif c <= MAX_EXHAUSTIVE:
            masks = _subset_masks(c)
        else:
            masks = np.eye(c, dtype=bool)
        left = masks.astype(np.int64) @ sub
        right = counts[None, :] - left
        cost = _weighted_gini(left) + _weighted_gini(right)
        b = int(np.argmin(cost))
        in_left = present[masks[b]]
        in_right = present[~masks[b]]
        sides = sorted([in_left, in_right], key=lambda g: g[0])
        branch = np.zeros(len(f.categories), dtype=np.int64)
        branch[sides[1]] = 1
        groups = tuple(tuple(f.categories[i] for i in g) for g in sides)
        return float(cost[b]), Split(f.name, "categorical", groups=groups), branch[x]

    # gain ratio

    def _gain_ratio(self, idx, counts):
        yi = self.y[idx]
        n = len(idx)
        h_parent = float(_entropy_rows(counts[None, :])[0])
        candidates = []
        for f in self.features:
            x = f.values[idx]
            if f.kind == "numeric":
                xs, left, valid = _sorted_cuts(x, yi, self.k)
                if not len(valid):
                    continue
                right = counts[None, :] - left
                nl = left.sum(axis=1)
                cond = (nl * _entropy_rows(left) + (n - nl) * _entropy_rows(right)) / n
                b = int(np.argmin(cond))
                gain = h_parent - float(cond[b])
                w = np.array([nl[b], n - nl[b]], dtype=float) / n
                split_info = float(-(w * np.log2(w)).sum())
                cut = valid[b]
                t = float((xs[cut] + xs[cut + 1]) / 2)
                split = Split(f.name, "numeric", thresholds=(t,))
                assign = (x > t).astype(np.int64)
            else:
                table = _table(x, yi, len(f.categories), self.k)
                present = np.flatnonzero(table.sum(axis=1) > 0)
                if len(present) < 2:
                    continue
                sub = table[present]
                if self.params.value_subsets:
                    groups, gain, split_info = subset_values(sub, h_parent)
                else:
                    groups = [[i] for i in range(len(present))]
                    gain, split_info = _partition_scores(sub, h_parent, n)
                branch = np.full(len(f.categories), -1, dtype=np.int64)
                for b, g in enumerate(groups):
                    branch[present[g]] = b
                split = Split(
                    f.name, "categorical", groups=tuple(tuple(f.categories[present[i]] for i in g) for g in groups)
                )
                assign = branch[x]
            # At least two branches must hold min_leaf cases.
            if np.count_nonzero(np.bincount(assign) >= self.params.min_leaf) < 2:
                continue
            if gain > EPS and split_info > EPS:
                candidates.append((gain, gain / split_info, split, assign))
        if not candidates:
            return None
        # Only tests with at least average gain compete on ratio.
        average = sum(c[0] for c in candidates) / len(candidates)
        best = None
        for gain, ratio, split, assign in candidates:
            if gain >= average - EPS and (best is None or ratio > best[0] + EPS):
                best = (ratio, split, assign)
        return best[1], best[2], None

    # CHAID

    def _chaid(self, idx, counts):
        yi = self.y[idx]
        alpha = self.params.chaid_alpha
        best = None
        for f in self.features:
            x = f.values[idx]
            if f.kind == "numeric":
                if len(np.unique(x)) < 2:
                    continue
                thresholds, codes = _quantile_bins(x, self.params.chaid_bins)
                n_codes = len(thresholds) + 1
                ordinal = True
            else:
                codes, n_codes, ordinal = x, len(f.categories), f.kind == "ordinal"
            table = _table(codes, yi, n_codes, self.k)
            present = np.flatnonzero(table.sum(axis=1) > 0)
            if len(present) < 2:
                continue
            sub = table[present]
            groups, _ = merge_categories(sub, alpha, ordinal)
            merged = np.array([sub[g].sum(axis=0) for g in groups])
            merged = merged[:, merged.sum(axis=0) > 0]
            p = 1.0 if merged.shape[1] < 2 else chi_square(merged)[1]
            c, r = len(present), len(groups)
            multiplier = bonferroni_ordinal(c, r) if ordinal else bonferroni_nominal(c, r)
            adjusted = min(1.0, p * multiplier)
            if best is not None and adjusted >= best[0] - EPS:
                continue
            branch = np.zeros(n_codes, dtype=np.int64)
            for b, g in enumerate(groups):
                branch[present[g]] = b
            if f.kind == "numeric":
                # Boundaries between consecutive merged bin groups.
                cuts = tuple(float(thresholds[present[g[-1]]]) for g in groups[:-1])
                split = Split(f.name, "numeric", thresholds=cuts)
            else:
                split = Split(
                    f.name, "categorical", groups=tuple(tuple(f.categories[present[i]] for i in g) for g in groups)
                )
            best = (adjusted, split, branch[codes])
        if best is None:
            return None
        if self.params.pruning and best[0] > alpha:
            return None
        return best[1], best[2], best[0]


def _records(features: list[_Feature], rows: np.ndarray) -> list[dict]:
    out = []
    for r in rows:
        rec = {}
        for f in features:
            v = f.values[r]
            rec[f.name] = float(v) if f.kind == "numeric" else f.categories[v]
        out.append(rec)
    return out


def _errors(node: Node) -> int:
    return node.n - max(node.counts)


def ccp_path(root: Node) -> list[float]:
    """Weakest-link alphas, in raw misclassification counts per extra leaf, starting at 0."""
    work = copy.deepcopy(root)
    alphas = [0.0]
    while not work.is_leaf:
        links = []

        def visit(node: Node) -> tuple[int, int]:
            if node.is_leaf:
                return _errors(node), 1
            err, leaves = 0, 0
            for c in node.children:
                e, l = visit(c)
                err, leaves = err + e, leaves + l
            links.append(((_errors(node) - err) / (leaves - 1), node))
            return err, leaves

        visit(work)
        weakest = min(g for g, _ in links)
        for g, node in links:
            if g <= weakest + EPS:
                node.collapse()
        alphas.append(max(weakest, alphas[-1]))
    return alphas


def prune_ccp(root: Node, alpha: float) -> tuple[int, int]:
    """Prune in place to the smallest subtree minimising errors + alpha * leaves.

    Returns the pruned subtree's (training errors, leaves).
    """
    if root.is_leaf:
        return _errors(root), 1
    err, leaves = 0, 0
    for c in root.children:
        e, l = prune_ccp(c, alpha)
        err, leaves = err + e, leaves + l
    if _errors(root) + alpha <= err + alpha * leaves + EPS:
        root.collapse()
        return _errors(root), 1
    return err, leaves


def pessimistic_errors(n: int, errors: int, cf: float = CONFIDENCE_FACTOR) -> float:
    """Upper ``cf`` confidence limit on a leaf's error count.

    The exact binomial limit: the error rate p at which seeing at most
    ``errors`` mistakes in ``n`` cases has probability ``cf``.
    """
    if n == 0:
        return 0.0
    if errors >= n:
        return float(n)
    return n * float(stats.beta.ppf(1.0 - cf, errors + 1, n - errors))


def prune_pessimistic(root: Node, cf: float = CONFIDENCE_FACTOR) -> float:
    """Bottom-up subtree replacement; returns the estimated errors after pruning."""
    as_leaf = pessimistic_errors(root.n, _errors(root), cf)
    if root.is_leaf:
        return as_leaf
    subtree = sum(prune_pessimistic(c, cf) for c in root.children)
    if as_leaf <= subtree + EPS:
        root.collapse()
        return as_leaf
    return subtree


def _cv_alpha(grower: _Grower, features: list[_Feature], idx: np.ndarray, alphas: list[float], seed: int) -> float:
    candidates = [math.sqrt(a * b) for a, b in zip(alphas, alphas[1:])] + [alphas[-1]]
    folds = stratified_folds(grower.y[idx].tolist(), grower.params.cv_folds, seed)
    classes = grower.classes
    wrong = np.zeros(len(candidates))
    for held in folds:
        if not len(held):
            continue
        mask = np.ones(len(idx), dtype=bool)
        mask[held] = False
        sub = grower.grow(idx[mask])
        # ccp alphas are in counts; rescale to the fold's training size.
        scale = mask.sum() / len(idx)
        records = _records(features, idx[held])
        truth = [classes[v] for v in grower.y[idx[held]]]
        for j, a in enumerate(candidates):
            pruned = copy.deepcopy(sub)
            prune_ccp(pruned, a * scale)
            probe = Tree("cart", "", classes, [], pruned)
            wrong[j] += sum(probe.leaf_for(r).label != t for r, t in zip(records, truth))
    # Fewest CV errors; ties go to the larger alpha (the smaller tree).
    best = int(np.flatnonzero(wrong == wrong.min())[-1])
    return candidates[best]


def grow_tree(
    dataset: Dataset,
    target: str,
    algorithm: str = "gain_ratio",
    params: TreeParams = TreeParams(),
    seed: int = 0,
) -> Tree:
    """Induce a classification tree predicting ``target`` from every other attribute.

    ``seed`` only drives the internal cross-validation CART uses to choose its
    cost-complexity pruning level; the other algorithms are seed-free.
    """
    if algorithm not in ALGORITHMS:
        raise ValueError(f"unknown algorithm {algorithm!r}; expected one of {ALGORITHMS}")
    features, y, classes = _frame(dataset, target)
    grower = _Grower(features, y, classes, algorithm, params)
    idx = np.arange(len(y))
    root = grower.grow(idx)
    tree = Tree(algorithm, target, classes, [f.name for f in features], root)
    if not params.pruning or algorithm == "chaid":
        tree.pruned = params.pruning
        return tree
    if algorithm == "cart":
        alphas = ccp_path(root)
        alpha = _cv_alpha(grower, features, idx, alphas, seed) if len(alphas) > 1 else 0.0
        prune_ccp(root, alpha)
        tree.ccp_alpha = alpha
    else:
        prune_pessimistic(root)
    tree.pruned = True
    return tree
