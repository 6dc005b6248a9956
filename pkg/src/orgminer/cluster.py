"""Feature encoding, K-means / K-medoids clustering, k selection and cluster profiles."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .dataset import Dataset
from .errors import IncompleteData, KExceedsN, SingleCluster


@dataclass
class FeatureMatrix:
    names: list[str]
    values: np.ndarray
    sources: list[tuple[str, str | None]]
    constant: list[str] = field(default_factory=list)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]


def encode(dataset: Dataset) -> FeatureMatrix:
    """Encode a complete dataset for squared-Euclidean clustering.

    categorical -> one-hot block; binary -> one 0/1 column (1 for the second
    category); ordinal -> rank / (levels - 1); numeric -> min-max scaled, with
    constant columns set to 0.5.
    """
    if not dataset.is_complete():
        raise IncompleteData("encode needs a complete dataset; impute first")
    n = dataset.n_rows
    blocks = []
    names: list[str] = []
    sources: list[tuple[str, str | None]] = []
    constant = []
    for spec in dataset.codebook:
        col = dataset.column(spec.name)
        if spec.kind == "numeric":
            x = np.array(col, dtype=float).reshape(n, 1)
            lo, hi = (x.min(), x.max()) if n else (0.0, 0.0)
            if hi > lo:
                x = (x - lo) / (hi - lo)
            else:
                x = np.full((n, 1), 0.5)
                constant.append(spec.name)
            blocks.append(x)
            names.append(spec.name)
            sources.append((spec.name, None))
        elif spec.kind == "binary":
            on = spec.categories[1]
            blocks.append(np.array([[1.0 if v == on else 0.0] for v in col]).reshape(n, 1))
            names.append(f"{spec.name}={on}")
            sources.append((spec.name, on))
        elif spec.kind == "ordinal":
            rank = {c: i for i, c in enumerate(spec.categories)}
            top = len(spec.categories) - 1
            blocks.append(np.array([rank[v] / top for v in col], dtype=float).reshape(n, 1))
            names.append(spec.name)
            sources.append((spec.name, None))
        else:
            pos = {c: i for i, c in enumerate(spec.categories)}
            block = np.zeros((n, len(spec.categories)))
            block[np.arange(n), [pos[v] for v in col]] = 1.0
            blocks.append(block)
            names.extend(f"{spec.name}={c}" for c in spec.categories)
            sources.extend((spec.name, c) for c in spec.categories)
    values = np.hstack(blocks) if blocks else np.zeros((n, 0))
    return FeatureMatrix(names, values, sources, constant)


@dataclass
class Clustering:
    algorithm: str
    k: int
    labels: np.ndarray
    wcss: float
    n_iter: int
    centers: np.ndarray | None = None
    medoids: list[int] | None = None
    wcss_trace: list[float] = field(default_factory=list)
    build_cost: float | None = None

    @property
    def sizes(self) -> list[int]:
        return np.bincount(self.labels, minlength=self.k).tolist()


def _sq_dists(x: np.ndarray, centers: np.ndarray) -> np.ndarray:
    d = (x * x).sum(1)[:, None] - 2.0 * x @ centers.T + (centers * centers).sum(1)[None, :]
    return np.maximum(d, 0.0)


def _kmeanspp(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """Greedy k-means++: each step samples 2 + ln(k) D^2-weighted candidates and
    keeps the one that lowers the potential most."""
    n = x.shape[0]
    trials = 2 + int(np.log(k))
    chosen = [int(rng.integers(n))]
    d2 = ((x - x[chosen[0]]) ** 2).sum(1)
    for _ in range(1, k):
        total = d2.sum()
        if total > 0:
            cdf = np.cumsum(d2)
            cand = np.searchsorted(cdf, rng.random(trials) * total, side="right")
            cand = np.minimum(cand, n - 1)
        else:
            # every point coincides with a chosen center
            rest = np.setdiff1d(np.arange(n), chosen)
            cand = np.array([int(rng.choice(rest))])
        cand_d2 = np.minimum(d2[None, :], _sq_dists(x, x[cand]).T)
        best = int(cand_d2.sum(1).argmin())
        chosen.append(int(cand[best]))
        d2 = cand_d2[best]
    return x[chosen].copy()


def kmeans(features: FeatureMatrix, k: int, seed: int = 0, max_iter: int = 100) -> Clustering:
    """Lloyd's algorithm with k-means++ seeding.

    Stops at an assignment fixpoint or after ``max_iter`` rounds. An empty
    cluster is reseeded at the point farthest from its current centroid.
    ``wcss_trace`` holds the objective after every round.
    """
    x = features.values
    n = x.shape[0]
    if k < 1 or k > n:
        raise KExceedsN(f"k={k} with n={n}")
    rng = np.random.default_rng(seed)
    centers = _kmeanspp(x, k, rng)
    labels = np.full(n, -1)
    trace = []
    it = 0
    for it in range(1, max_iter + 1):
        d = _sq_dists(x, centers)
        new = d.argmin(1)
        counts = np.bincount(new, minlength=k)
        for c in np.flatnonzero(counts == 0):
            own = d[np.arange(n), new]
            own[np.bincount(new, minlength=k)[new] <= 1] = -1.0  # never empty another cluster
            far = int(own.argmax())
            new[far] = c
            d[far, c] = 0.0
            centers[c] = x[far]
        for c in range(k):
            centers[c] = x[new == c].mean(0)
        wcss = float(((x - centers[new]) ** 2).sum())
        trace.append(wcss)
        if np.array_equal(new, labels):
            break
        labels = new
    return Clustering("kmeans", k, labels, trace[-1], it, centers=centers, wcss_trace=trace)


def best_kmeans(
    features: FeatureMatrix, k: int, seed: int = 0, restarts: int = 10, max_iter: int = 100
) -> Clustering:
    """Lowest-WCSS run among ``restarts`` seeds spawned from ``seed``."""
    seeds = np.random.SeedSequence(seed).generate_state(restarts)
    best = None
    for s in seeds:
        run = kmeans(features, k, int(s), max_iter)
        if best is None or run.wcss < best.wcss:
            best = run
    return best


def pairwise_sq_dists(x: np.ndarray) -> np.ndarray:
    return _sq_dists(x, x)


def kmedoids(features: FeatureMatrix, k: int, seed: int = 0) -> Clustering:
    """PAM: greedy BUILD, then best-improvement SWAP until no swap lowers the cost.

    Dissimilarity is squared Euclidean. The procedure is deterministic (ties go
    to the lowest row index); ``seed`` is accepted for interface parity with
    :func:`kmeans` and does not change the result.
    """
    x = features.values
    n = x.shape[0]
    if k < 1 or k > n:
        raise KExceedsN(f"k={k} with n={n}")
    d = pairwise_sq_dists(x)
    np.fill_diagonal(d, 0.0)

    medoids = [int(d.sum(0).argmin())]
    nearest = d[:, medoids[0]].copy()
    while len(medoids) < k:
        gain = np.maximum(nearest[:, None] - d, 0.0).sum(0)
        gain[medoids] = -1.0
        m = int(gain.argmax())
        medoids.append(m)
        nearest = np.minimum(nearest, d[:, m])
    build_cost = float(nearest.sum())

    cost = build_cost
    iters = 0
    while True:
        iters += 1
        dm = d[:, medoids]
        order = np.argsort(dm, axis=1, kind="stable")
        first = dm[np.arange(n), order[:, 0]]
        second = dm[np.arange(n), order[:, 1]] if k > 1 else np.full(n, np.inf)
        best_delta, best_swap = 0.0, None
        is_medoid = np.zeros(n, dtype=bool)
        is_medoid[medoids] = True
        for mi in range(k):
            # cost of each point if medoid mi is removed
            without = np.where(order[:, 0] == mi, second, first)
            new_cost = np.minimum(without[:, None], d).sum(0)
            new_cost[is_medoid] = np.inf
            h = int(new_cost.argmin())
            delta = new_cost[h] - cost
            if delta < best_delta - 1e-12:
                best_delta, best_swap = delta, (mi, h)
        if best_swap is None:
            break
        mi, h = best_swap
        medoids[mi] = h
        cost = float(d[:, medoids].min(1).sum())
    labels = d[:, medoids].argmin(1)
    return Clustering(
        "kmedoids", k, labels, cost, iters, medoids=list(medoids),
        centers=x[medoids].copy(), build_cost=build_cost,
    )


def silhouette_samples(x: np.ndarray, labels: np.ndarray) -> np.ndarray:
    labels = np.asarray(labels)
    present = np.unique(labels)
    if len(present) < 2:
        raise SingleCluster("silhouette needs at least two non-empty clusters")
    dist = np.sqrt(pairwise_sq_dists(x))
    np.fill_diagonal(dist, 0.0)
    n = len(labels)
    sums = np.stack([dist[:, labels == c].sum(1) for c in present], axis=1)
    sizes = np.array([(labels == c).sum() for c in present])
    own = np.searchsorted(present, labels)
    own_size = sizes[own]
    a = np.where(own_size > 1, sums[np.arange(n), own] / np.maximum(own_size - 1, 1), 0.0)
    means = sums / sizes[None, :]
    means[np.arange(n), own] = np.inf
    b = means.min(1)
    denom = np.maximum(a, b)
    s = np.where(denom > 0, (b - a) / np.where(denom > 0, denom, 1.0), 0.0)
    return np.where(own_size > 1, s, 0.0)


def silhouette(features: FeatureMatrix, clustering: Clustering) -> float:
    """Mean silhouette with Euclidean distance; members of singleton clusters score 0."""
    return float(silhouette_samples(features.values, clustering.labels).mean())


@dataclass
class KSelection:
    best_k: int
    silhouettes: dict[int, float]
    wcss: dict[int, float]
    runs: dict[int, Clustering]

    def to_dict(self) -> dict:
        return {
            "best_k": self.best_k,
            "table": [
                {"k": k, "silhouette": round(self.silhouettes[k], 6), "wcss": round(self.wcss[k], 6)}
                for k in sorted(self.silhouettes)
            ],
        }


def select_k(
    features: FeatureMatrix,
    k_range: tuple[int, int] = (2, 15),
    seed: int = 0,
    restarts: int = 10,
    max_iter: int = 100,
) -> KSelection:
    """Pick k in the inclusive range with the highest silhouette (smaller k on ties)."""
    lo, hi = k_range
    if lo < 2 or hi > features.n or lo > hi:
        raise KExceedsN(f"k_range {k_range} must lie within [2, {features.n}]")
    sil, wcss, runs = {}, {}, {}
    for k in range(lo, hi + 1):
        run = best_kmeans(features, k, seed + k, restarts, max_iter)
        runs[k] = run
        wcss[k] = run.wcss
        sil[k] = silhouette(features, run)
    best = max(sil, key=lambda k: (sil[k], -k))
    return KSelection(best, sil, wcss, runs)


@dataclass
class Distinction:
    attribute: str
    value: str
    prevalence: float
    global_prevalence: float
    lift: float


@dataclass
class ProfileEntry:
    cluster: int
    label: str
    size: int
    dominant: dict[str, tuple[str, float]]
    distinguishing: list[Distinction]

    def narrative(self, limit: int = 6) -> str:
        if self.size == 0:
            return "This cluster is empty."
        parts = []
        for d in self.distinguishing[:limit]:
            if d.prevalence >= 1.0:
                parts.append(f"all members have {d.attribute} = {d.value}")
            else:
                parts.append(
                    f"{d.prevalence:.0%} have {d.attribute} = {d.value} "
                    f"(vs {d.global_prevalence:.0%} overall)"
                )
        if not parts:
            return "No attribute stands out from the overall population."
        text = "; ".join(parts)
        return text[0].upper() + text[1:] + "."


@dataclass
class ClusterProfile:
    lift_factor: float
    clusters: list[ProfileEntry]
    skipped_numeric: list[str] = field(default_factory=list)

    def by_label(self) -> dict[str, ProfileEntry]:
        return {c.label: c for c in self.clusters}

    def to_dict(self) -> dict:
        return {
            "lift_factor": self.lift_factor,
            "skipped_numeric": self.skipped_numeric,
            "clusters": [
                {
                    "cluster": c.label,
                    "size": c.size,
                    "dominant": {a: {"value": v, "prevalence": round(p, 6)} for a, (v, p) in c.dominant.items()},
                    "distinguishing": [
                        {
                            "attribute": d.attribute,
                            "value": d.value,
                            "prevalence": round(d.prevalence, 6),
                            "global_prevalence": round(d.global_prevalence, 6),
                            "lift": round(d.lift, 6),
                        }
                        for d in c.distinguishing
                    ],
                    "narrative": c.narrative(),
                }
                for c in self.clusters
            ],
        }

    def to_markdown(self) -> str:
        lines = []
        for c in self.clusters:
            lines.append(f"- **Cluster {c.label}** ({c.size} members): {c.narrative()}")
        return "\n".join(lines) + "\n"


def cluster_label(index: int) -> str:
    """Clusters are named 1..k in reports, as in the narrative cluster lists."""
    return str(index + 1)


def _mode_with_share(values: list) -> tuple[str, float]:
    counts = Counter(values)
    top = max(counts.values())
    value = min(v for v, c in counts.items() if c == top)
    return value, top / len(values)


def profile_clusters(dataset: Dataset, clustering: Clustering, lift_factor: float = 1.5) -> ClusterProfile:
    """Dominant value per attribute per cluster, and the dominant values whose
    within-cluster prevalence is at least ``lift_factor`` times their global one.

    Numeric attributes are skipped; discretize them first to profile them.
    """
    labels = np.asarray(clustering.labels)
    if len(labels) != dataset.n_rows:
        raise ValueError(f"{len(labels)} labels for {dataset.n_rows} rows")
    specs = [s for s in dataset.codebook if not s.is_numeric]
    skipped = [s.name for s in dataset.codebook if s.is_numeric]
    columns = {s.name: dataset.column(s.name) for s in specs}
    n = dataset.n_rows
    global_freq = {name: Counter(col) for name, col in columns.items()}
    entries = []
    for c in range(clustering.k):
        members = np.flatnonzero(labels == c)
        dominant = {}
        distinct = []
        if len(members):
            for s in specs:
                vals = [columns[s.name][i] for i in members]
                value, share = _mode_with_share(vals)
                dominant[s.name] = (value, share)
                g = global_freq[s.name][value] / n
                lift = share / g
                if lift >= lift_factor:
                    distinct.append(Distinction(s.name, value, share, g, lift))
        distinct.sort(key=lambda d: (-d.prevalence, -d.lift, d.attribute))
        entries.append(ProfileEntry(c, cluster_label(c), int(len(members)), dominant, distinct))
    return ClusterProfile(lift_factor, entries, skipped)
