"""End-to-end orchestration: ingest, prep, reduce, cluster, trees, rules, report bundle.

A bundle directory holds one JSON report per stage, the input codebook, a
markdown summary, and ``manifest.json`` with a SHA-256 per file, stage timings
and the configuration echo. Everything except the timings is a pure function
of the configuration and the input files.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Callable, Mapping

from . import __version__
from .cluster import ClusterProfile, Clustering, KSelection, encode, profile_clusters, select_k
from .dataset import MISSING, AttributeSpec, Codebook, Dataset, ingest_csv, load_codebook, parse_value, validate
from .errors import BundleIncomplete, SchemaMismatch, StageError
from .prep import PrepResult, prepare
from .reduce import AssociationMatrix, ReductionReport, apply_reduction, association_matrix, prune_redundant
from .rules import Discretization, LinkedReport, Rule, RuleParams, RuleSet, discretize, gri, gri_all_consequents
from .rules import link_rules_to_clusters
from .trees import ComparisonTable, Tree, TreeParams, compare_algorithms, grow_tree, predict

STAGES = ("ingest", "prep", "reduce", "cluster", "trees", "rules")
BUNDLE_FILES = ("codebook.json", "prep.json", "reduce.json", "cluster.json", "trees.json", "rules.json")
CLUSTER_ATTRIBUTE = "cluster"
SAMPLE_RULES = 8


@dataclass(frozen=True)
class PrepConfig:
    max_missing_fraction: float = 0.5
    z_threshold: float = 3.5


@dataclass(frozen=True)
class ReduceConfig:
    threshold: float = 0.4


@dataclass(frozen=True)
class ClusterConfig:
    k_range: tuple[int, int] = (2, 15)
    restarts: int = 10
    lift_factor: float = 1.5


@dataclass(frozen=True)
class TreesConfig:
    params: TreeParams = TreeParams()
    folds: int = 5


@dataclass(frozen=True)
class RulesConfig:
    params: RuleParams = RuleParams()
    # mine only rules that conclude cluster membership
    cluster_consequent_only: bool = True


def _build(cls, payload: Mapping | None, section: str):
    payload = dict(payload or {})
    known = {f.name for f in fields(cls)}
    unknown = set(payload) - known
    if unknown:
        raise ValueError(f"config section {section!r}: unknown keys {sorted(unknown)}")
    return cls(**payload)


@dataclass(frozen=True)
class PipelineConfig:
    data: Path | None = None
    codebook: Path | None = None
    out: Path | None = None
    seed: int = 0
    prep: PrepConfig = PrepConfig()
    reduce: ReduceConfig = ReduceConfig()
    cluster: ClusterConfig = ClusterConfig()
    trees: TreesConfig = TreesConfig()
    rules: RulesConfig = RulesConfig()
    bins: int = 4

    def __post_init__(self):
        if self.bins < 2:
            raise ValueError("bins must be at least 2")
        if not 0 <= self.prep.max_missing_fraction <= 1:
            raise ValueError("max_missing_fraction must lie in [0, 1]")
        if not 0 < self.reduce.threshold <= 1:
            raise ValueError("reduce threshold must lie in (0, 1]")
        lo, hi = self.cluster.k_range
        if lo < 2 or lo > hi or self.cluster.restarts < 1:
            raise ValueError("k_range must satisfy 2 <= lo <= hi and restarts >= 1")
        if self.trees.folds < 2:
            raise ValueError("folds must be at least 2")

    @classmethod
    def from_dict(cls, payload: Mapping) -> "PipelineConfig":
        payload = dict(payload)
        known = {f.name for f in fields(cls)}
        unknown = set(payload) - known
        if unknown:
            raise ValueError(f"unknown config keys {sorted(unknown)}")
        cluster = dict(payload.get("cluster") or {})
        if "k_range" in cluster:
            cluster["k_range"] = tuple(cluster["k_range"])
        trees = dict(payload.get("trees") or {})
        folds = trees.pop("folds", 5)
        rules = dict(payload.get("rules") or {})
        only = rules.pop("cluster_consequent_only", True)
        return cls(
            data=Path(payload["data"]) if payload.get("data") else None,
            codebook=Path(payload["codebook"]) if payload.get("codebook") else None,
            out=Path(payload["out"]) if payload.get("out") else None,
            seed=int(payload.get("seed", 0)),
            prep=_build(PrepConfig, payload.get("prep"), "prep"),
            reduce=_build(ReduceConfig, payload.get("reduce"), "reduce"),
            cluster=_build(ClusterConfig, cluster, "cluster"),
            trees=TreesConfig(_build(TreeParams, trees, "trees"), folds),
            rules=RulesConfig(_build(RuleParams, rules, "rules"), only),
            bins=int(payload.get("bins", 4)),
        )

    @classmethod
    def load(cls, path: str | Path) -> "PipelineConfig":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

    def to_dict(self) -> dict:
        """Echo for the manifest. Input and output paths are left out so that
        bundles built from identical inputs in different places hash alike."""
        return {
            "seed": self.seed,
            "prep": asdict(self.prep),
            "reduce": asdict(self.reduce),
            "cluster": {
                "k_range": list(self.cluster.k_range),
                "restarts": self.cluster.restarts,
                "lift_factor": self.cluster.lift_factor,
            },
            "trees": {**self.trees.params.to_dict(), "folds": self.trees.folds},
            "rules": {**self.rules.params.to_dict(), "cluster_consequent_only": self.rules.cluster_consequent_only},
            "bins": self.bins,
        }


@dataclass
class ReportBundle:
    out: Path | None
    dataset: Dataset | None = None
    prep: PrepResult | None = None
    matrix: AssociationMatrix | None = None
    reduction: ReductionReport | None = None
    reduced: Dataset | None = None
    selection: KSelection | None = None
    clustering: Clustering | None = None
    profile: ClusterProfile | None = None
    labelled: Dataset | None = None
    comparison: ComparisonTable | None = None
    tree: Tree | None = None
    discretization: Discretization | None = None
    rules: RuleSet | None = None
    links: LinkedReport | None = None
    timings: dict[str, float] = field(default_factory=dict)
    files: dict[str, str] = field(default_factory=dict)
    manifest: dict = field(default_factory=dict)

    @property
    def target(self) -> str:
        return self.labelled.codebook.names[-1] if self.labelled is not None else CLUSTER_ATTRIBUTE


def _dump(payload: Any) -> str:
    return json.dumps(payload, indent=2, ensure_ascii=False, allow_nan=False) + "\n"


def _write(bundle: ReportBundle, name: str, text: str) -> None:
    if bundle.out is None:
        return
    (bundle.out / name).write_text(text, encoding="utf-8")
    bundle.files[name] = hashlib.sha256(text.encode("utf-8")).hexdigest()


def _write_manifest(bundle: ReportBundle, config: PipelineConfig, status: str, error: StageError | None = None) -> None:
    bundle.manifest = {
        "version": __version__,
        "status": status,
        "files": dict(sorted(bundle.files.items())),
        "timings": {k: round(v, 6) for k, v in bundle.timings.items()},
        "config": config.to_dict(),
    }
    if error is not None:
        bundle.manifest["failed_stage"] = error.stage
        bundle.manifest["error"] = f"{type(error.cause).__name__}: {error.cause}"
    if bundle.out is not None:
        (bundle.out / "manifest.json").write_text(_dump(bundle.manifest), encoding="utf-8")


def _cluster_attribute(codebook: Codebook) -> str:
    name = CLUSTER_ATTRIBUTE
    while name in codebook:
        name += "_"
    return name


def _summary(bundle: ReportBundle) -> str:
    lines = ["# Informal-group mining report", ""]
    if bundle.prep is not None:
        p = bundle.prep
        lines += [
            "## Preparation",
            "",
            f"- rows in: {p.dataset.n_rows + len(p.dropped_rows)}, rows kept: {p.dataset.n_rows}",
            f"- cells imputed: {len(p.imputations)} (mode for categories, mean for numbers)",
            f"- outliers flagged: {sum(len(v) for v in p.outliers.flagged.values())}",
            "",
        ]
    if bundle.reduction is not None:
        r = bundle.reduction
        lines += [
            "## Reduction",
            "",
            f"Attributes reduced from {len(r.surviving) + len(r.drops)} to {len(r.surviving)} "
            f"at threshold {r.threshold}.",
            "",
        ]
        lines += [f"{line}" for line in r.to_dict()["deleted_similar_factors"]]
        lines.append("")
    if bundle.selection is not None and bundle.profile is not None:
        lines += [
            "## Clusters",
            "",
            f"k = {bundle.selection.best_k} (highest silhouette, "
            f"{bundle.selection.silhouettes[bundle.selection.best_k]:.4f}); sizes {bundle.clustering.sizes}.",
            "",
            bundle.profile.to_markdown(),
        ]
    if bundle.comparison is not None and bundle.tree is not None:
        t = bundle.tree
        lines += [
            "## Decision trees",
            "",
            bundle.comparison.to_markdown(),
            "",
            f"Chosen: {bundle.comparison.rows[bundle.comparison.algorithms.index(t.algorithm)][0]}; "
            f"root attribute: {t.root_attribute}; leaves: {t.leaf_count}.",
            "",
        ]
    if bundle.rules is not None and bundle.links is not None:
        lines += [
            "## Rules",
            "",
            f"{len(bundle.rules)} rules (min support {bundle.rules.params.min_support}, "
            f"min confidence {bundle.rules.params.min_confidence}); the first {SAMPLE_RULES} are shown, "
            "all are in rules.json.",
            "",
            LinkedReport(bundle.links.rows[:SAMPLE_RULES]).to_markdown(),
            "",
        ]
    return "\n".join(lines)


def run_pipeline(config: PipelineConfig, stop_after: str | None = None) -> ReportBundle:
    """Run the stages in order, writing each report as soon as it exists.

    ``stop_after`` names the last stage to run. A failing stage raises
    StageError after a manifest with status "failed" is written.
    """
    if stop_after is not None and stop_after not in STAGES:
        raise ValueError(f"unknown stage {stop_after!r}; expected one of {STAGES}")
    bundle = ReportBundle(out=Path(config.out) if config.out is not None else None)
    if bundle.out is not None:
        bundle.out.mkdir(parents=True, exist_ok=True)
    state: dict[str, Any] = {}

    def ingest() -> None:
        if config.codebook is None or config.data is None:
            raise FileNotFoundError("both a data file and a codebook file are required")
        codebook = load_codebook(config.codebook)
        bundle.dataset = ingest_csv(config.data, codebook)
        state["validation"] = validate(bundle.dataset)
        _write(bundle, "codebook.json", _dump(codebook.to_dict()))

    def prep() -> None:
        bundle.prep = prepare(bundle.dataset, config.prep.max_missing_fraction, config.prep.z_threshold)
        report = bundle.prep.to_dict()
        report["validation"] = state["validation"].to_dict()
        _write(bundle, "prep.json", _dump(report))

    def reduce() -> None:
        bundle.matrix = association_matrix(bundle.prep.dataset)
        bundle.reduction = prune_redundant(bundle.matrix, config.reduce.threshold)
        bundle.reduced = apply_reduction(bundle.prep.dataset, bundle.reduction)
        _write(bundle, "reduce.json", _dump({**bundle.reduction.to_dict(), "matrix": bundle.matrix.to_dict()}))

    def cluster() -> None:
        features = encode(bundle.reduced)
        bundle.selection = select_k(features, config.cluster.k_range, config.seed, config.cluster.restarts)
        bundle.clustering = bundle.selection.runs[bundle.selection.best_k]
        bundle.profile = profile_clusters(bundle.reduced, bundle.clustering, config.cluster.lift_factor)
        labels = [str(int(c) + 1) for c in bundle.clustering.labels]
        k = bundle.clustering.k
        name = _cluster_attribute(bundle.reduced.codebook)
        spec = AttributeSpec(name, "categorical", tuple(str(i) for i in range(1, k + 1)))
        bundle.labelled = bundle.reduced.with_column(spec, labels)
        _write(
            bundle,
            "cluster.json",
            _dump(
                {
                    "attribute": name,
                    "selection": bundle.selection.to_dict(),
                    "k": k,
                    "sizes": bundle.clustering.sizes,
                    "wcss": bundle.clustering.wcss,
                    "labels": labels,
                    "profile": bundle.profile.to_dict(),
                }
            ),
        )

    def trees() -> None:
        target = bundle.target
        bundle.comparison = compare_algorithms(
            bundle.labelled, target, config.trees.params, config.seed, config.trees.folds
        )
        bundle.tree = grow_tree(bundle.labelled, target, bundle.comparison.best, config.trees.params, config.seed)
        _write(
            bundle,
            "trees.json",
            _dump(
                {
                    "target": target,
                    "comparison": bundle.comparison.to_dict(),
                    "table": bundle.comparison.render(),
                    "chosen": bundle.tree.summary(),
                    "tree": bundle.tree.to_dict(),
                    "rendered": bundle.tree.render(),
                }
            ),
        )

    def rules() -> None:
        target = bundle.target
        binned, bundle.discretization = discretize(bundle.labelled, config.bins)
        if config.rules.cluster_consequent_only:
            bundle.rules = gri(binned, target, config.rules.params)
        else:
            bundle.rules = gri_all_consequents(binned, config.rules.params)
        cluster_rules = [r for r in bundle.rules if r.consequent.attribute == target]
        bundle.links = link_rules_to_clusters(cluster_rules, bundle.profile)
        _write(
            bundle,
            "rules.json",
            _dump(
                {
                    **bundle.rules.to_dict(),
                    "discretization": bundle.discretization.to_dict(),
                    "linked": bundle.links.to_dict(),
                }
            ),
        )

    steps: dict[str, Callable[[], None]] = {
        "ingest": ingest,
        "prep": prep,
        "reduce": reduce,
        "cluster": cluster,
        "trees": trees,
        "rules": rules,
    }
    for stage in STAGES:
        start = time.perf_counter()
        try:
            steps[stage]()
        except Exception as exc:
            error = StageError(stage, exc)
            _write(bundle, "summary.md", _summary(bundle))
            _write_manifest(bundle, config, "failed", error)
            raise error from exc
        bundle.timings[stage] = time.perf_counter() - start
        if stage == stop_after:
            break
    _write(bundle, "summary.md", _summary(bundle))
    _write_manifest(bundle, config, "complete" if stop_after in (None, "rules") else f"stopped after {stop_after}")
    return bundle


# scoring new records


@dataclass
class ScoredRecord:
    row: int
    cluster: str
    rules: list[Rule]

    def to_dict(self) -> dict:
        return {"row": self.row, "cluster": self.cluster, "rules": [str(r) for r in self.rules]}


@dataclass
class ScoringModel:
    """Everything a bundle needs to score records: schema, fills, drops, tree, rules."""

    codebook: Codebook
    fills: dict[str, Any]
    dropped: list[str]
    tree: Tree
    discretization: Discretization
    rules: RuleSet

    @classmethod
    def load(cls, bundle_dir: str | Path) -> "ScoringModel":
        root = Path(bundle_dir)
        missing = [name for name in BUNDLE_FILES if not (root / name).is_file()]
        if missing:
            raise BundleIncomplete(f"{root}: missing {missing}")

        def read(name: str) -> dict:
            return json.loads((root / name).read_text(encoding="utf-8"))

        rules = read("rules.json")
        return cls(
            codebook=Codebook.from_dict(read("codebook.json")),
            fills=read("prep.json")["fill_values"],
            dropped=[d["dropped"] for d in read("reduce.json")["drops"]],
            tree=Tree.from_dict(read("trees.json")["tree"]),
            discretization=Discretization.from_dict(rules["discretization"]),
            rules=RuleSet.from_dict(rules),
        )

    def complete(self, record: Mapping[str, Any]) -> dict[str, Any]:
        """Fill absent or missing fields from the bundle and drop reduced columns."""
        unknown = [k for k in record if k not in self.codebook]
        if unknown:
            raise SchemaMismatch(f"unknown attributes {unknown}")
        out = {}
        for name in self.codebook.names:
            if name in self.dropped:
                continue
            value = record.get(name, MISSING)
            out[name] = self.fills[name] if value is MISSING else value
        return out

    def score(self, record: Mapping[str, Any], row: int = 0) -> ScoredRecord:
        full = self.complete(record)
        cluster = predict(self.tree, full)
        binned = self.discretization.apply_record(full)
        binned[self.tree.target] = cluster
        matched = self.rules.matching(binned, min_confidence=1.0)
        return ScoredRecord(row, cluster, matched)


def parse_records(text: str, codebook: Codebook) -> list[dict[str, Any]]:
    """Rows of a CSV whose header is any subset of the codebook's attributes."""
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        return []
    unknown = [h for h in header if h not in codebook]
    if unknown:
        raise SchemaMismatch(f"unknown attributes {unknown}")
    if len(set(header)) != len(header):
        raise SchemaMismatch("repeated column in record header")
    records = []
    for i, tokens in enumerate(reader):
        if not tokens:
            continue
        if len(tokens) != len(header):
            raise SchemaMismatch(f"record {i} has {len(tokens)} fields, expected {len(header)}")
        records.append({h: parse_value(t, codebook[h], i) for h, t in zip(header, tokens)})
    return records


def score_new_record(bundle_dir: str | Path, record_csv: str | Path) -> list[ScoredRecord]:
    """Predicted cluster and matching confidence-1.0 rules for every row of ``record_csv``."""
    model = ScoringModel.load(bundle_dir)
    records = parse_records(Path(record_csv).read_text(encoding="utf-8"), model.codebook)
    return [model.score(r, i) for i, r in enumerate(records)]


def bundle_hashes(bundle_dir: str | Path) -> dict[str, str]:
    """The per-file content hashes recorded in a bundle's manifest."""
    manifest = json.loads((Path(bundle_dir) / "manifest.json").read_text(encoding="utf-8"))
    return manifest["files"]

