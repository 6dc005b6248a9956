"""Association rules: Apriori itemsets, J-measure beam search (GRI), and an exhaustive oracle.

Rows are read as item sets, one ``(attribute, value)`` item per non-numeric
column. Numeric columns carry no items; :func:`discretize` turns them into
ordinal bins first.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, NamedTuple, Sequence

import numpy as np

from .cluster import ClusterProfile
from .dataset import AttributeSpec, Dataset
from .errors import ConsequentNotCategorical, SearchSpaceTooLarge, UnknownAttribute, UnknownCluster

SEARCH_LIMIT = 2_000_000


class Item(NamedTuple):
    attribute: str
    value: str

    def __str__(self) -> str:
        return f"{self.attribute} = {self.value}"


# discretization


@dataclass
class Discretization:
    """Bin edges per numeric attribute; bin i holds values in (edges[i-1], edges[i]]."""

    edges: dict[str, list[float]]
    labels: dict[str, list[str]]

    def bin_label(self, attribute: str, value: float) -> str:
        i = int(np.searchsorted(self.edges[attribute], value, side="left"))
        return self.labels[attribute][i]

    def apply(self, dataset: Dataset) -> Dataset:
        out = dataset
        for name in self.edges:
            if name not in out.codebook:
                continue
            spec = out.codebook[name]
            binned = AttributeSpec(name, "ordinal", tuple(self.labels[name]), spec.group)
            out = out.replace_column(binned, [self.bin_label(name, v) for v in out.column(name)])
        return out

    def apply_record(self, record: Mapping[str, Any]) -> dict[str, Any]:
        return {
            k: self.bin_label(k, v) if k in self.edges and isinstance(v, (int, float)) else v
            for k, v in record.items()
        }

    def to_dict(self) -> dict:
        return {name: {"edges": self.edges[name], "labels": self.labels[name]} for name in self.edges}

    @classmethod
    def from_dict(cls, payload: Mapping) -> "Discretization":
        return cls(
            {k: [float(e) for e in v["edges"]] for k, v in payload.items()},
            {k: list(v["labels"]) for k, v in payload.items()},
        )


def _fmt(x: float) -> str:
    return f"{x:g}"


def fit_discretization(dataset: Dataset, bins: int = 4) -> Discretization:
    """Quantile edges for every numeric column; bins are labelled ``lo..hi``."""
    if bins < 2:
        raise ValueError("need at least 2 bins")
    edges: dict[str, list[float]] = {}
    labels: dict[str, list[str]] = {}
    for spec in dataset.codebook:
        if not spec.is_numeric:
            continue
        x = np.array(dataset.column(spec.name), dtype=float)
        inner = np.unique(np.quantile(x, np.linspace(0, 1, bins + 1)[1:-1]))
        inner = [float(e) for e in inner if e < x.max()]
        bounds = [float(x.min())] + inner + [float(x.max())]
        edges[spec.name] = inner
        labels[spec.name] = [f"{_fmt(lo)}..{_fmt(hi)}" for lo, hi in zip(bounds, bounds[1:])]
    return Discretization(edges, labels)


def discretize(dataset: Dataset, bins: int = 4) -> tuple[Dataset, Discretization]:
    d = fit_discretization(dataset, bins)
    return d.apply(dataset), d


# counting


class _Index:
    """Row bitsets per item, as Python ints, for exact support counting."""

    def __init__(self, dataset: Dataset, skip: Iterable[str] = ()):
        skip = set(skip)
        self.n = dataset.n_rows
        self.order: dict[Item, tuple[int, int]] = {}
        self.bits: dict[Item, int] = {}
        self.by_attribute: list[list[Item]] = []
        for a_idx, spec in enumerate(dataset.codebook):
            if spec.is_numeric or spec.name in skip:
                continue
            col = dataset.column(spec.name)
            items = []
            for c_idx, cat in enumerate(spec.categories):
                mask = 0
                for r, v in enumerate(col):
                    if v == cat:
                        mask |= 1 << r
                if mask:
                    item = Item(spec.name, cat)
                    self.order[item] = (a_idx, c_idx)
                    self.bits[item] = mask
                    items.append(item)
            if items:
                self.by_attribute.append(items)
        self.all_rows = (1 << self.n) - 1

    def key(self, items: Iterable[Item]) -> tuple:
        return tuple(sorted(self.order[i] for i in items))

    def mask(self, items: Iterable[Item]) -> int:
        m = self.all_rows
        for i in items:
            m &= self.bits[i]
        return m


def _canonical(index: _Index, items: Iterable[Item]) -> tuple[Item, ...]:
    return tuple(sorted(items, key=lambda i: index.order[i]))


def apriori(dataset: Dataset, min_support: float, max_len: int | None = None) -> dict[frozenset, float]:
    """Every itemset with support >= ``min_support``, found level by level.

    Candidates of size k+1 join two frequent k-itemsets sharing their first k-1
    items and survive only if all their k-subsets are frequent.
    """
    index = _Index(dataset)
    n = index.n
    if n == 0:
        return {}
    items = sorted(index.bits, key=lambda i: index.order[i])
    result: dict[frozenset, float] = {}
    level: dict[tuple[Item, ...], int] = {}
    for item in items:
        count = index.bits[item].bit_count()
        if count / n >= min_support:
            level[(item,)] = index.bits[item]
    size = 1
    while level:
        for itemset, mask in level.items():
            result[frozenset(itemset)] = mask.bit_count() / n
        if max_len is not None and size >= max_len:
            break
        keys = sorted(level, key=lambda s: index.key(s))
        frequent = set(level)
        nxt: dict[tuple[Item, ...], int] = {}
        for i, a in enumerate(keys):
            for b in keys[i + 1:]:
                if a[:-1] != b[:-1]:
                    break
                if a[-1].attribute == b[-1].attribute:
                    continue
                cand = a + (b[-1],)
                if any(cand[:j] + cand[j + 1:] not in frequent for j in range(len(cand))):
                    continue
                mask = level[a] & index.bits[b[-1]]
                if mask.bit_count() / n >= min_support:
                    nxt[cand] = mask
        level = nxt
        size += 1
    return result


# rules


@dataclass(frozen=True)
class RuleParams:
    min_support: float = 0.02
    min_confidence: float = 1.0
    max_antecedent_len: int = 3
    top_n: int = 100
    beam_width: int = 50

    def __post_init__(self):
        if self.min_support < 0 or not 0 <= self.min_confidence <= 1:
            raise ValueError("min_support must be >= 0 and min_confidence in [0, 1]")
        if self.max_antecedent_len < 0 or self.top_n < 0 or self.beam_width < 1:
            raise ValueError("max_antecedent_len and top_n must be >= 0, beam_width >= 1")

    def to_dict(self) -> dict:
        return {
            "min_support": self.min_support,
            "min_confidence": self.min_confidence,
            "max_antecedent_len": self.max_antecedent_len,
            "top_n": self.top_n,
            "beam_width": self.beam_width,
        }


@dataclass(frozen=True)
class Rule:
    antecedent: tuple[Item, ...]
    consequent: Item
    support: float
    confidence: float
    j_measure: float
    cover: int
    antecedent_support: float

    def matches(self, record: Mapping[str, Any]) -> bool:
        return all(record.get(i.attribute) == i.value for i in self.antecedent)

    def render_antecedent(self) -> str:
        return " and ".join(str(i) for i in self.antecedent)

    def __str__(self) -> str:
        return f"{self.render_antecedent()} => {self.consequent}"

    def to_dict(self) -> dict:
        return {
            "antecedent": [list(i) for i in self.antecedent],
            "consequent": list(self.consequent),
            "support": self.support,
            "confidence": self.confidence,
            "j_measure": self.j_measure,
            "cover": self.cover,
            "antecedent_support": self.antecedent_support,
        }

    @classmethod
    def from_dict(cls, payload: Mapping) -> "Rule":
        return cls(
            antecedent=tuple(Item(*i) for i in payload["antecedent"]),
            consequent=Item(*payload["consequent"]),
            support=payload["support"],
            confidence=payload["confidence"],
            j_measure=payload["j_measure"],
            cover=payload["cover"],
            antecedent_support=payload["antecedent_support"],
        )


@dataclass
class RuleSet:
    consequent_attribute: str
    rules: list[Rule]
    params: RuleParams = field(default_factory=RuleParams)
    n_rows: int = 0
    method: str = "gri"

    def __len__(self) -> int:
        return len(self.rules)

    def __iter__(self):
        return iter(self.rules)

    def matching(self, record: Mapping[str, Any], min_confidence: float = 1.0) -> list[Rule]:
        return [r for r in self.rules if r.confidence >= min_confidence and r.matches(record)]

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "consequent_attribute": self.consequent_attribute,
            "n_rows": self.n_rows,
            "params": self.params.to_dict(),
            "n_rules": len(self.rules),
            "rules": [r.to_dict() for r in self.rules],
        }

    @classmethod
    def from_dict(cls, payload: Mapping) -> "RuleSet":
        return cls(
            consequent_attribute=payload["consequent_attribute"],
            rules=[Rule.from_dict(r) for r in payload["rules"]],
            params=RuleParams(**payload["params"]),
            n_rows=payload.get("n_rows", 0),
            method=payload.get("method", "gri"),
        )

    def to_markdown(self) -> str:
        lines = ["| Rule | Results |", "|---|---|"]
        for r in self.rules:
            lines.append(
                f"| {r.render_antecedent()} | {r.consequent} "
                f"(confidence {r.confidence:.2%}, support {r.support:.2%}, cover {r.cover}) |"
            )
        return "\n".join(lines)


def _xlogy(x: float, y: float) -> float:
    return 0.0 if x == 0 else x * math.log2(y)


def j_measure(p_a: float, p_c_given_a: float, p_c: float) -> float:
    """J(A -> C) = p(A) * [p(C|A) log2(p(C|A)/p(C)) + (1-p(C|A)) log2((1-p(C|A))/(1-p(C)))]."""
    q, r = p_c_given_a, 1.0 - p_c_given_a
    first = _xlogy(q, q / p_c) if q > 0 else 0.0
    second = _xlogy(r, r / (1.0 - p_c)) if r > 0 else 0.0
    return max(0.0, p_a * (first + second))


class _RuleSearch:
    def __init__(self, dataset: Dataset, consequent_attribute: str, params: RuleParams):
        if consequent_attribute not in dataset.codebook:
            raise UnknownAttribute(f"consequent attribute {consequent_attribute!r} is not in the dataset")
        spec = dataset.codebook[consequent_attribute]
        if spec.is_numeric:
            raise ConsequentNotCategorical(f"consequent attribute {consequent_attribute!r} is numeric")
        self.params = params
        self.attribute = consequent_attribute
        self.index = _Index(dataset, skip=[consequent_attribute])
        self.n = dataset.n_rows
        col = dataset.column(consequent_attribute)
        self.targets: list[tuple[int, Item, int]] = []
        for c_idx, cat in enumerate(spec.categories):
            mask = sum(1 << r for r, v in enumerate(col) if v == cat)
            if mask:
                self.targets.append((c_idx, Item(consequent_attribute, cat), mask))

    def evaluate(self, antecedent: tuple[Item, ...]) -> tuple[list[Rule], float, bool]:
        """Rules passing both thresholds, best J over consequents, and whether
        any consequent keeps enough joint support to extend further."""
        n = self.n
        mask = self.index.mask(antecedent)
        count_a = mask.bit_count()
        rules = []
        best_j = 0.0
        alive = False
        if count_a == 0:
            return rules, best_j, alive
        for _, item, c_mask in self.targets:
            count_ac = (mask & c_mask).bit_count()
            if count_ac / n < self.params.min_support:
                continue
            alive = True
            confidence = count_ac / count_a
            j = j_measure(count_a / n, confidence, c_mask.bit_count() / n)
            best_j = max(best_j, j)
            if confidence >= self.params.min_confidence:
                rules.append(Rule(antecedent, item, count_ac / n, confidence, j, count_a, count_a / n))
        return rules, best_j, alive

    def rank(self, rules: Iterable[Rule]) -> list[Rule]:
        target_order = {item: c for c, item, _ in self.targets}

        def key(r: Rule):
            return (-r.confidence, -r.support, len(r.antecedent), self.index.key(r.antecedent), target_order[r.consequent])

        ranked = sorted(rules, key=key)
        return ranked[: self.params.top_n]

    def result(self, rules: Iterable[Rule], method: str) -> RuleSet:
        return RuleSet(self.attribute, self.rank(rules), self.params, self.n, method)


def gri(dataset: Dataset, consequent_attribute: str, params: RuleParams = RuleParams()) -> RuleSet:
    """Rule induction by J-measure beam search.

    Each round specialises every antecedent in the beam by one more item from
    an unused attribute. Antecedents whose support with some consequent value
    stays at or above ``min_support`` may be specialised further; the best
    ``beam_width`` of them by J-measure (ties in attribute/category order) form
    the next beam. Every evaluated antecedent contributes its rules meeting
    ``min_support`` and ``min_confidence``; the final list is ordered by
    confidence, support, antecedent length, then attribute/category order, and
    cut to ``top_n``.
    """
    search = _RuleSearch(dataset, consequent_attribute, params)
    index = search.index
    if search.n == 0 or params.max_antecedent_len == 0:
        return search.result([], "gri")
    rules: list[Rule] = []
    beam: list[tuple[Item, ...]] = [()]
    for _ in range(params.max_antecedent_len):
        seen: set[tuple[Item, ...]] = set()
        scored = []
        for parent in beam:
            used = {i.attribute for i in parent}
            for items in index.by_attribute:
                if items[0].attribute in used:
                    continue
                for item in items:
                    cand = _canonical(index, parent + (item,))
                    if cand in seen:
                        continue
                    seen.add(cand)
                    found, best_j, alive = search.evaluate(cand)
                    rules.extend(found)
                    if alive:
                        scored.append((-best_j, index.key(cand), cand))
        scored.sort(key=lambda t: (t[0], t[1]))
        beam = [cand for _, _, cand in scored[: params.beam_width]]
        if not beam:
            break
    return search.result(rules, "gri")


def gri_all_consequents(dataset: Dataset, params: RuleParams = RuleParams()) -> RuleSet:
    """:func:`gri` run once per non-numeric attribute as consequent, merged and re-ranked."""
    codebook = dataset.codebook
    rules: list[Rule] = []
    for spec in codebook:
        if not spec.is_numeric:
            rules.extend(gri(dataset, spec.name, params).rules)

    def key(r: Rule):
        spec = codebook[r.consequent.attribute]
        antecedent = sorted(
            (codebook.index(i.attribute), codebook[i.attribute].categories.index(i.value)) for i in r.antecedent
        )
        consequent = (codebook.index(spec.name), spec.categories.index(r.consequent.value))
        return (-r.confidence, -r.support, len(r.antecedent), tuple(antecedent), consequent)

    ranked = sorted(rules, key=key)[: params.top_n]
    return RuleSet("*", ranked, params, dataset.n_rows, "gri")


def search_space_size(dataset: Dataset, consequent_attribute: str, max_len: int) -> int:
    """Number of antecedent conjunctions of up to ``max_len`` items over distinct attributes."""
    arities = [
        len(spec.categories)
        for spec in dataset.codebook
        if not spec.is_numeric and spec.name != consequent_attribute
    ]
    # elementary symmetric sums of the attribute arities
    e = [1] + [0] * max_len
    for m in arities:
        for k in range(max_len, 0, -1):
            e[k] += e[k - 1] * m
    return sum(e[1:])


def brute_force_rules(dataset: Dataset, consequent_attribute: str, params: RuleParams = RuleParams()) -> RuleSet:
    """Exhaustive enumeration of every antecedent; the reference for :func:`gri`."""
    size = search_space_size(dataset, consequent_attribute, params.max_antecedent_len)
    if size > SEARCH_LIMIT:
        raise SearchSpaceTooLarge(f"{size} antecedents exceed the limit of {SEARCH_LIMIT}")
    search = _RuleSearch(dataset, consequent_attribute, params)
    if search.n == 0:
        return search.result([], "brute_force")
    rules: list[Rule] = []
    groups = search.index.by_attribute
    for length in range(1, params.max_antecedent_len + 1):
        for attrs in itertools.combinations(groups, length):
            for antecedent in itertools.product(*attrs):
                found, _, _ = search.evaluate(tuple(antecedent))
                rules.extend(found)
    return search.result(rules, "brute_force")


# linking to cluster profiles


@dataclass
class LinkedReport:
    rows: list[tuple[str, str]]

    def __len__(self) -> int:
        return len(self.rows)

    def to_markdown(self) -> str:
        lines = ["| Rule | Results |", "|---|---|"]
        lines += [f"| {rule} | {result} |" for rule, result in self.rows]
        return "\n".join(lines)

    def to_dict(self) -> dict:
        return {"rows": [{"rule": a, "results": b} for a, b in self.rows]}


def link_rules_to_clusters(rules: RuleSet | Sequence[Rule], profiles: ClusterProfile) -> LinkedReport:
    """Pair each rule's antecedent with the narrative of the cluster it concludes."""
    by_label = profiles.by_label()
    rows = []
    for rule in rules:
        entry = by_label.get(rule.consequent.value)
        if entry is None:
            raise UnknownCluster(f"rule concludes cluster {rule.consequent.value!r}, which has no profile")
        rows.append((rule.render_antecedent(), f"They are in cluster {entry.label}. {entry.narrative()}"))
    return LinkedReport(rows)
