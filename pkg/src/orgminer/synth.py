"""Synthetic questionnaire data with planted informal groups and planted redundant pairs.

The reference codebook below is a reconstruction: only part of the original
43-question instrument is known (general, personal, work and interest
questions), so the remaining questions are plausible fill-ins. Six derived
attributes are generated as noisy copies of a source attribute and exist to be
found and removed by the reduction stage.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dataset import MISSING, AttributeSpec, Codebook, Dataset, save_codebook
from .errors import InfeasibleSpec, LengthMismatch
from .reduce import cramers_v, pearson_abs

A = AttributeSpec
YES_NO = ("no", "yes")

REFERENCE_BASE = (
    # general
    A("sex", "binary", ("female", "male"), "general"),
    A("age", "numeric", (), "general"),
    A("education_level", "ordinal", ("diploma", "associate", "bachelor", "master", "doctorate"), "general"),
    A("field_of_study", "categorical", (
        "mechanical_eng", "industrial_eng", "civil_eng", "electronic_eng", "computer_eng",
        "executive_mgmt", "industrial_mgmt", "commercial_mgmt", "math_science", "accounting",
    ), "general"),
    A("university", "categorical", (
        "tehran", "amirkabir", "sharif", "iust", "khajeh_nasir", "shahid_beheshti", "azad", "other",
    ), "general"),
    # personal
    A("marital_status", "binary", ("single", "married"), "personal"),
    A("children", "ordinal", ("0", "1", "2", "3+"), "personal"),
    A("birthplace", "categorical", (
        "tehran", "karaj", "tabriz", "isfahan", "mashhad", "shiraz", "ahvaz", "qom", "rasht", "other",
    ), "personal"),
    A("living_area", "categorical", (
        "north", "south", "east", "west", "center", "northwest", "northeast", "suburbs",
    ), "personal"),
    A("student_status", "binary", YES_NO, "personal"),
    A("university_entrance", "ordinal", ("before_2002", "2002_2008", "2009_2014", "after_2014"), "personal"),
    A("native_language", "categorical", (
        "farsi", "azeri", "kurdish", "arabic", "gilaki", "luri", "mazandarani", "other",
    ), "personal"),
    # work
    A("year_started", "numeric", (), "work"),
    A("department", "categorical", (
        "engineering", "planning", "quality", "procurement", "finance", "it", "logistics", "sales",
    ), "work"),
    A("job_type", "categorical", (
        "design_expert", "planning_expert", "development_improvement", "organizing_planning",
        "quality_control", "purchasing", "accounting", "software_support", "logistics",
    ), "work"),
    A("responsibility", "categorical", (
        "expert", "senior_expert", "head", "manager", "technician", "clerk", "supervisor", "assistant",
    ), "work"),
    A("contract_type", "categorical", ("permanent", "contractor", "temporary"), "work"),
    A("company_transport", "binary", YES_NO, "work"),
    A("relatives_in_company", "binary", YES_NO, "work"),
    A("charity_member", "binary", YES_NO, "work"),
    A("writing_group_member", "binary", YES_NO, "work"),
    A("internet_group_member", "binary", YES_NO, "work"),
    A("religious_views", "categorical", ("devout", "observant", "moderate", "secular", "undisclosed"), "work"),
    A("job_qualification", "ordinal", ("low", "medium", "high"), "work"),
    # interests
    A("internet_use", "ordinal", ("none", "low", "medium", "high"), "interests"),
    A("film_type", "categorical", (
        "drama", "comedy", "action", "documentary", "historical", "animation", "thriller", "none",
    ), "interests"),
    A("music_type", "categorical", (
        "classic", "folk", "pop", "persian_traditional", "european", "rock", "religious", "none",
    ), "interests"),
    A("all_kinds_music", "binary", YES_NO, "interests"),
    A("arabic", "binary", YES_NO, "interests"),
    A("english", "binary", YES_NO, "interests"),
    A("turkish", "binary", YES_NO, "interests"),
    A("no_sports_class", "binary", YES_NO, "interests"),
    A("computer_class", "binary", YES_NO, "interests"),
    A("favorite_sport", "categorical", (
        "football", "volleyball", "swimming", "mountaineering", "fitness", "wrestling", "cycling", "none",
    ), "interests"),
    A("national_football_team", "categorical", ("persepolis", "esteghlal", "sepahan", "tractor", "none"), "interests"),
    A("hobby", "categorical", (
        "reading", "travel", "gaming", "cooking", "photography", "gardening", "painting", "none",
    ), "interests"),
    A("news_source", "categorical", (
        "tv", "radio", "newspaper", "websites", "social_media", "satellite_tv", "colleagues", "none",
    ), "interests"),
)


@dataclass(frozen=True)
class RedundantPair:
    source: str
    name: str
    target: float
    group: str | None = None
    # positional relabeling of the source's categories, e.g. club names
    categories: tuple[str, ...] | None = None


REFERENCE_PAIRS = (
    RedundantPair("age", "working_experience", 0.572, "work"),
    RedundantPair("charity_member", "book_lover", 0.591, "interests"),
    RedundantPair(
        "national_football_team", "foreign_football_team", 0.651, "interests",
        ("barcelona", "real_madrid", "bayern", "manchester_united", "none"),
    ),
    RedundantPair("all_kinds_music", "traditional_music", 0.523, "interests"),
    RedundantPair(
        "field_of_study", "computer_work_field", 0.498, "work",
        ("cad_design", "plc_programming", "structural_software", "embedded_systems", "software_dev",
         "erp_systems", "production_planning", "sales_systems", "data_analysis", "spreadsheets"),
    ),
    RedundantPair("no_sports_class", "no_class_participation", 0.924, "interests"),
)

NUMERIC_RANGES = {"age": (22, 60), "year_started": (1990, 2020)}


@dataclass(frozen=True)
class SynthSpec:
    n_rows: int = 210
    n_groups: int = 9
    attributes: tuple[AttributeSpec, ...] = REFERENCE_BASE
    signature_attributes_per_group: int = 4
    noise_rate: float = 0.05
    redundant_pairs: tuple[RedundantPair, ...] = REFERENCE_PAIRS
    seed: int = 0
    disjoint_signatures: bool = False
    missing_rate: float = 0.0
    numeric_ranges: dict = field(default_factory=lambda: dict(NUMERIC_RANGES))
    # probability mass of each attribute's most common background category
    background_dominance: float = 0.4
    # signature attributes need this many categories (unless disjoint layout)
    min_signature_levels: int = 6
    # background weight of the groups' signature values, relative to a uniform share
    signature_leak: float = 0.5


@dataclass
class GroundTruth:
    labels: list[int]
    signatures: dict[int, dict[str, str]]
    redundant_pairs: list[dict]

    def to_dict(self) -> dict:
        return {
            "labels": self.labels,
            "signatures": {str(g): sig for g, sig in self.signatures.items()},
            "redundant_pairs": self.redundant_pairs,
        }


def _validate(spec: SynthSpec) -> None:
    if spec.n_groups < 1 or spec.n_groups > spec.n_rows:
        raise InfeasibleSpec(f"n_groups={spec.n_groups} must be in [1, n_rows={spec.n_rows}]")
    if not 0 <= spec.noise_rate < 0.5:
        raise InfeasibleSpec(f"noise_rate={spec.noise_rate} must be in [0, 0.5)")
    if not 0 <= spec.signature_leak <= 1:
        raise InfeasibleSpec(f"signature_leak={spec.signature_leak} must be in [0, 1]")
    if not 0 < spec.background_dominance < 1:
        raise InfeasibleSpec(f"background_dominance={spec.background_dominance} must be in (0, 1)")
    if not 0 <= spec.missing_rate < 1:
        raise InfeasibleSpec(f"missing_rate={spec.missing_rate} must be in [0, 1)")
    names = {a.name for a in spec.attributes}
    for pair in spec.redundant_pairs:
        if pair.source not in names:
            raise InfeasibleSpec(f"redundant pair source {pair.source!r} not in codebook")
        if pair.name in names:
            raise InfeasibleSpec(f"redundant attribute {pair.name!r} already exists")
        if not 0 < pair.target <= 1:
            raise InfeasibleSpec(f"redundant pair target {pair.target} outside (0, 1]")


def signature_pool(spec: SynthSpec) -> list[AttributeSpec]:
    """Attributes eligible to carry group signatures: non-numeric, not involved
    in a planted pair, most categories first."""
    sources = {p.source for p in spec.redundant_pairs}
    pool = [a for a in spec.attributes if not a.is_numeric and a.name not in sources]
    if not spec.disjoint_signatures:
        wide = [a for a in pool if a.kind == "categorical" and len(a.categories) >= spec.min_signature_levels]
        pool = wide or pool
    return sorted(pool, key=lambda a: -len(a.categories))


def background_modes(spec: SynthSpec, rng: np.random.Generator) -> dict[str, str]:
    """The dominant background category of every non-numeric attribute."""
    return {
        a.name: a.categories[int(rng.integers(len(a.categories)))]
        for a in spec.attributes
        if not a.is_numeric
    }


def _layout_search(n_groups: int, s: int, capacity: list[int], budget: int = 50_000) -> list[list[int]] | None:
    """Depth-first search for signature attribute sets in which no two attributes
    share more than one group. Returns one list of attribute indices per group,
    or None when the budget is exhausted."""
    n_attr = len(capacity)
    users: list[set[int]] = [set() for _ in range(n_attr)]
    groups: list[list[int]] = [[] for _ in range(n_groups)]
    steps = 0

    def place(slot: int) -> bool:
        nonlocal steps
        if slot == n_groups * s:
            return True
        steps += 1
        if steps > budget:
            return False
        g = slot // s
        chosen = groups[g]
        floor = chosen[-1] + 1 if chosen else 0
        order = sorted(range(floor, n_attr), key=lambda a: (-len(users[a]), a))
        for a in order:
            if len(users[a]) >= capacity[a]:
                continue
            if any(users[a] & users[b] for b in chosen):
                continue
            chosen.append(a)
            users[a].add(g)
            if place(slot + 1):
                return True
            chosen.pop()
            users[a].discard(g)
        return False

    return groups if place(0) else None


def _layout_greedy(n_groups: int, s: int, capacity: list[int], disjoint: bool) -> list[list[int]]:
    n_attr = len(capacity)
    users: list[set[int]] = [set() for _ in range(n_attr)]
    groups = []
    for g in range(n_groups):
        chosen: list[int] = []
        for _ in range(s):
            best = None
            for a in range(n_attr):
                if a in chosen or len(users[a]) >= capacity[a] or (disjoint and users[a]):
                    continue
                key = (sum(bool(users[a] & users[b]) for b in chosen), len(users[a]), a)
                if best is None or key < best:
                    best = key
            if best is None:
                raise InfeasibleSpec(
                    f"cannot place {s} signature attributes for {n_groups} groups "
                    f"with {n_attr} eligible attributes"
                )
            chosen.append(best[2])
            users[best[2]].add(g)
        groups.append(chosen)
    return groups


def assign_signatures(spec: SynthSpec, modes: dict[str, str] | None = None) -> dict[int, dict[str, str]]:
    """Choose each group's signature attributes and forced values.

    Attributes are reused across groups only when needed, and then each group
    gets its own category, never the attribute's dominant background category.
    The layout keeps any two attributes from sharing more than one group when
    such a layout can be found, because every shared group adds association
    between the two attributes.
    """
    modes = modes or {}
    s = spec.signature_attributes_per_group
    pool = signature_pool(spec)
    free = [[c for c in a.categories if c != modes.get(a.name)] for a in pool]
    if spec.disjoint_signatures:
        capacity = [1] * len(pool)
    else:
        capacity = [len(f) for f in free]
    if s > len(pool) or sum(capacity) < spec.n_groups * s:
        raise InfeasibleSpec(
            f"cannot place {s} signature attributes for {spec.n_groups} groups "
            f"with {len(pool)} eligible attributes"
        )
    layout = _layout_search(spec.n_groups, s, capacity)
    if layout is None:
        layout = _layout_greedy(spec.n_groups, s, capacity, spec.disjoint_signatures)
    used = [0] * len(pool)
    sigs: dict[int, dict[str, str]] = {}
    for g, attrs in enumerate(layout):
        sigs[g] = {}
        for a in attrs:
            sigs[g][pool[a].name] = free[a][used[a]]
            used[a] += 1
    return sigs


def _association(a: AttributeSpec, x: list, y: list) -> float:
    if a.is_numeric:
        return pearson_abs(np.array(x, float), np.array(y, float))
    return cramers_v(x, y)


def _calibrated_copy(
    source: AttributeSpec, column: list, target: float, rng: np.random.Generator, rounds: int = 20
) -> tuple[list, float]:
    """Copy ``column`` and overwrite the first m cells of a random order with
    values from a shuffled copy of the column, searching m so the association
    with the source lands near ``target``."""
    n = len(column)
    order = rng.permutation(n)
    donor = [column[i] for i in rng.permutation(n)]

    def build(m: int) -> list:
        out = list(column)
        for i in order[:m]:
            out[i] = donor[i]
        return out

    lo, hi = 0, n
    best = (abs(1.0 - target), 0, 1.0)
    for _ in range(rounds):
        if hi - lo <= 1:
            break
        mid = (lo + hi) // 2
        assoc = _association(source, column, build(mid))
        if abs(assoc - target) < best[0]:
            best = (abs(assoc - target), mid, assoc)
        if assoc > target:
            lo = mid
        else:
            hi = mid
    _, m, assoc = best
    return build(m), assoc


def reference_codebook(spec: SynthSpec = SynthSpec()) -> Codebook:
    """Base attributes plus one derived attribute per redundant pair, ordered by questionnaire part."""
    base = {a.name: a for a in spec.attributes}
    derived = []
    for p in spec.redundant_pairs:
        src = base[p.source]
        derived.append(
            AttributeSpec(p.name, src.kind, p.categories or src.categories, p.group or src.group)
        )
    ordered = []
    for grp in ("general", "personal", "work", "interests"):
        ordered += [a for a in spec.attributes if a.group == grp]
        ordered += [a for a in derived if a.group == grp]
    return Codebook(tuple(ordered))


def generate(spec: SynthSpec = SynthSpec()) -> tuple[Dataset, GroundTruth]:
    """Deterministic synthetic questionnaire for ``spec`` (including its seed)."""
    _validate(spec)
    rng = np.random.default_rng(spec.seed)
    n, k = spec.n_rows, spec.n_groups
    modes = background_modes(spec, rng)
    sigs = assign_signatures(spec, modes)
    labels = [i % k for i in range(n)]

    columns: dict[str, list] = {}
    for a in spec.attributes:
        if a.is_numeric:
            lo, hi = spec.numeric_ranges.get(a.name, (0, 100))
            columns[a.name] = [int(v) for v in rng.integers(lo, hi + 1, size=n)]
            continue
        m = len(a.categories)
        probs = np.full(m, (1.0 - spec.background_dominance) / (m - 1))
        probs[a.categories.index(modes[a.name])] = spec.background_dominance
        taken = [i for i, c in enumerate(a.categories) if any(sig.get(a.name) == c for sig in sigs.values())]
        if taken:
            probs[taken] *= spec.signature_leak
            free = np.ones(m, dtype=bool)
            free[a.categories.index(modes[a.name])] = False
            if probs[free].sum() > 0:
                probs[free] *= (1.0 - spec.background_dominance) / probs[free].sum()
            else:
                probs[~free] = 1.0
        draws = rng.choice(m, size=n, p=probs)
        col = [a.categories[d] for d in draws]
        flips = rng.random(n)
        others = rng.integers(len(a.categories) - 1, size=n)
        for i in range(n):
            forced = sigs[labels[i]].get(a.name)
            if forced is None:
                continue
            if flips[i] < spec.noise_rate:
                alt = [c for c in a.categories if c != forced]
                col[i] = alt[others[i]]
            else:
                col[i] = forced
        columns[a.name] = col

    base = {a.name: a for a in spec.attributes}
    planted = []
    for p in spec.redundant_pairs:
        src = base[p.source]
        copy, assoc = _calibrated_copy(src, columns[p.source], p.target, rng)
        if p.categories:
            relabel = dict(zip(src.categories, p.categories))
            copy = [relabel[v] for v in copy]
        columns[p.name] = copy
        planted.append({"source": p.source, "name": p.name, "target": p.target, "measured": round(assoc, 6)})

    codebook = reference_codebook(spec)
    rows = [tuple(columns[a.name][i] for a in codebook) for i in range(n)]
    if spec.missing_rate > 0:
        holes = rng.random((n, len(codebook))) < spec.missing_rate
        rows = [tuple(MISSING if holes[i, j] else v for j, v in enumerate(r)) for i, r in enumerate(rows)]
    truth = GroundTruth(labels, sigs, planted)
    return Dataset(codebook, tuple(rows)), truth


def write_synthetic(spec: SynthSpec, out_dir: str | Path) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    data, truth = generate(spec)
    paths = {
        "data": out / "data.csv",
        "codebook": out / "codebook.json",
        "ground_truth": out / "ground_truth.json",
    }
    data.to_csv(paths["data"])
    save_codebook(data.codebook, paths["codebook"])
    paths["ground_truth"].write_text(json.dumps(truth.to_dict(), indent=2) + "\n", encoding="utf-8")
    return paths


def adjusted_rand_index(labels_a, labels_b) -> float:
    """Chance-corrected pair-counting agreement of two partitions (1.0 = identical)."""
    a = list(labels_a)
    b = list(labels_b)
    if len(a) != len(b):
        raise LengthMismatch(f"{len(a)} vs {len(b)} labels")
    if len(a) < 2:
        raise LengthMismatch("adjusted_rand_index needs at least 2 labels")
    ia = {v: i for i, v in enumerate(dict.fromkeys(a))}
    ib = {v: i for i, v in enumerate(dict.fromkeys(b))}
    table = np.zeros((len(ia), len(ib)), dtype=np.int64)
    for x, y in zip(a, b):
        table[ia[x], ib[y]] += 1

    def pairs(v):
        v = np.asarray(v, dtype=float)
        return float((v * (v - 1) / 2).sum())

    index = pairs(table)
    sum_a = pairs(table.sum(1))
    sum_b = pairs(table.sum(0))
    total = len(a) * (len(a) - 1) / 2
    expected = sum_a * sum_b / total
    maximum = (sum_a + sum_b) / 2
    if maximum == expected:
        return 1.0
    return (index - expected) / (maximum - expected)
