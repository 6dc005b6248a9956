"""Tree and node types, prediction, JSON round-trip and text rendering."""

from __future__ import annotations

from bisect import bisect_left
from dataclasses import dataclass, field
from typing import Any, Mapping

from ..dataset import MISSING
from ..errors import SchemaMismatch

ALGORITHMS = ("cart", "gain_ratio", "chaid")
DISPLAY_NAMES = {"cart": "CART", "gain_ratio": "C5.0", "chaid": "CHAID"}


@dataclass(frozen=True)
class Split:
    """How an internal node routes a record.

    Categorical splits list one category group per child. Numeric splits keep
    sorted thresholds; child ``i`` takes values in ``(t[i-1], t[i]]``.
    """

    attribute: str
    kind: str
    groups: tuple[tuple[str, ...], ...] = ()
    thresholds: tuple[float, ...] = ()

    @property
    def n_branches(self) -> int:
        return len(self.groups) if self.kind == "categorical" else len(self.thresholds) + 1

    def branch(self, value: Any) -> int | None:
        """Child index for ``value``, or None when the value was never seen here."""
        if self.kind == "numeric":
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                return None
            return bisect_left(self.thresholds, value)
        for i, group in enumerate(self.groups):
            if value in group:
                return i
        return None

    def describe(self, i: int) -> str:
        a = self.attribute
        if self.kind == "categorical":
            group = self.groups[i]
            if len(group) == 1:
                return f"{a} = {group[0]}"
            return f"{a} in {{{', '.join(group)}}}"
        t = self.thresholds
        if i == 0:
            return f"{a} <= {t[0]:g}"
        if i == len(t):
            return f"{a} > {t[-1]:g}"
        return f"{t[i - 1]:g} < {a} <= {t[i]:g}"

    def to_dict(self) -> dict:
        out: dict[str, Any] = {"attribute": self.attribute, "type": self.kind}
        if self.kind == "categorical":
            out["groups"] = [list(g) for g in self.groups]
        else:
            out["thresholds"] = list(self.thresholds)
        return out

    @classmethod
    def from_dict(cls, payload: Mapping) -> "Split":
        return cls(
            attribute=payload["attribute"],
            kind=payload["type"],
            groups=tuple(tuple(g) for g in payload.get("groups", ())),
            thresholds=tuple(float(t) for t in payload.get("thresholds", ())),
        )


@dataclass
class Node:
    counts: list[int]
    label: str
    split: Split | None = None
    children: list["Node"] = field(default_factory=list)
    p_value: float | None = None

    @property
    def is_leaf(self) -> bool:
        return self.split is None

    @property
    def n(self) -> int:
        return sum(self.counts)

    def leaves(self) -> list["Node"]:
        if self.is_leaf:
            return [self]
        return [leaf for child in self.children for leaf in child.leaves()]

    def collapse(self) -> None:
        self.split = None
        self.children = []
        self.p_value = None

    def majority_child(self) -> int:
        sizes = [c.n for c in self.children]
        return sizes.index(max(sizes))

    def depth(self) -> int:
        return 0 if self.is_leaf else 1 + max(c.depth() for c in self.children)


@dataclass
class Tree:
    algorithm: str
    target: str
    classes: list[str]
    features: list[str]
    root: Node
    pruned: bool = False
    ccp_alpha: float | None = None

    @property
    def leaf_count(self) -> int:
        return len(self.root.leaves())

    @property
    def root_attribute(self) -> str | None:
        return None if self.root.is_leaf else self.root.split.attribute

    @property
    def depth(self) -> int:
        return self.root.depth()

    def distribution(self, node: Node) -> dict[str, int]:
        return dict(zip(self.classes, node.counts))

    def leaf_for(self, record: Mapping[str, Any]) -> Node:
        node = self.root
        while not node.is_leaf:
            value = record[node.split.attribute]
            if node.split.kind == "numeric" and value is not MISSING and not isinstance(value, (int, float)):
                raise SchemaMismatch(
                    f"attribute {node.split.attribute!r} expects a number, got {value!r}"
                )
            i = node.split.branch(value)
            node = node.children[node.majority_child() if i is None else i]
        return node

    def summary(self) -> dict:
        return {
            "algorithm": self.algorithm,
            "root_attribute": self.root_attribute,
            "leaf_count": self.leaf_count,
            "depth": self.depth,
        }

    def to_dict(self) -> dict:
        def node_dict(node: Node) -> dict:
            out: dict[str, Any] = {
                "label": node.label,
                "n": node.n,
                "distribution": self.distribution(node),
            }
            if node.p_value is not None:
                out["p_value"] = node.p_value
            if not node.is_leaf:
                out["split"] = node.split.to_dict()
                out["children"] = [node_dict(c) for c in node.children]
            return out

        return {
            "algorithm": self.algorithm,
            "target": self.target,
            "classes": self.classes,
            "features": self.features,
            "pruned": self.pruned,
            "ccp_alpha": self.ccp_alpha,
            "root_attribute": self.root_attribute,
            "leaf_count": self.leaf_count,
            "root": node_dict(self.root),
        }

    @classmethod
    def from_dict(cls, payload: Mapping) -> "Tree":
        classes = list(payload["classes"])

        def build(d: Mapping) -> Node:
            node = Node(
                counts=[int(d["distribution"][c]) for c in classes],
                label=d["label"],
                p_value=d.get("p_value"),
            )
            if "split" in d:
                node.split = Split.from_dict(d["split"])
                node.children = [build(c) for c in d["children"]]
            return node

        return cls(
            algorithm=payload["algorithm"],
            target=payload["target"],
            classes=classes,
            features=list(payload["features"]),
            root=build(payload["root"]),
            pruned=payload.get("pruned", False),
            ccp_alpha=payload.get("ccp_alpha"),
        )

    def render(self) -> str:
        """Indented text form, one line per branch; leaves show label and size."""
        if self.root.is_leaf:
            return f"{self.root.label} ({self.root.n})"
        lines: list[str] = []

        def walk(node: Node, depth: int) -> None:
            for i, child in enumerate(node.children):
                head = "|   " * depth + node.split.describe(i)
                if child.is_leaf:
                    lines.append(f"{head}: {child.label} ({child.n})")
                else:
                    lines.append(head)
                    walk(child, depth + 1)

        walk(self.root, 0)
        return "\n".join(lines)


def predict(tree: Tree, record: Mapping[str, Any]) -> str:
    """Class label of the leaf ``record`` reaches.

    A category the node never saw in training (or a missing value) follows the
    child with the largest training count.
    """
    absent = [f for f in tree.features if f not in record]
    if absent:
        raise SchemaMismatch(f"record lacks attributes the tree was trained on: {absent}")
    return tree.leaf_for(record).label
