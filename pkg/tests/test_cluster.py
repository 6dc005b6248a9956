import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from orgminer.cluster import (
    Clustering,
    FeatureMatrix,
    best_kmeans,
    encode,
    kmeans,
    kmedoids,
    profile_clusters,
    select_k,
    silhouette,
    silhouette_samples,
)
from orgminer.dataset import MISSING, AttributeSpec
from orgminer.errors import IncompleteData, KExceedsN, SingleCluster
from orgminer.synth import adjusted_rand_index

from conftest import make_dataset


def fm(points) -> FeatureMatrix:
    x = np.asarray(points, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    return FeatureMatrix([f"f{i}" for i in range(x.shape[1])], x, [(f"f{i}", None) for i in range(x.shape[1])])


def labelled(labels, k=None) -> Clustering:
    labels = np.asarray(labels)
    return Clustering("fixed", k or int(labels.max()) + 1, labels, 0.0, 0)


def test_encoding_rules():
    d = make_dataset(
        {"c": ["A", "B", "C"], "n": [10, 20, 30], "b": ["no", "yes", "yes"]},
        {"n": "numeric", "b": "binary"},
    )
    f = encode(d)
    assert f.names == ["c=A", "c=B", "c=C", "n", "b=yes"]
    assert f.values[1].tolist() == [0, 1, 0, 0.5, 1.0]
    assert f.values[:, 3].tolist() == [0.0, 0.5, 1.0]


def test_encode_ordinal_and_constant():
    d = make_dataset({"o": ["lo", "mid", "hi"], "n": [4, 4, 4]}, {"n": "numeric"})
    d = d.replace_column(AttributeSpec("o", "ordinal", ("lo", "mid", "hi")), ["lo", "mid", "hi"])
    f = encode(d)
    assert f.values[:, 0].tolist() == [0.0, 0.5, 1.0]
    assert f.values[:, 1].tolist() == [0.5, 0.5, 0.5]
    assert f.constant == ["n"]


def test_encode_requires_complete():
    with pytest.raises(IncompleteData):
        encode(make_dataset({"c": ["A", MISSING]}))


def test_one_hot_blocks_sum_to_one(planted):
    data, _ = planted
    f = encode(data)
    for spec in data.codebook:
        if spec.kind == "categorical":
            cols = [i for i, (a, _) in enumerate(f.sources) if a == spec.name]
            assert np.allclose(f.values[:, cols].sum(1), 1.0)
    assert f.values.min() >= 0 and f.values.max() <= 1


def test_two_points_two_clusters():
    c = kmeans(fm([[0.0], [5.0]]), 2, seed=3)
    assert sorted(c.labels.tolist()) == [0, 1]
    assert c.wcss == 0.0


def test_single_cluster_is_the_mean():
    x = np.random.default_rng(1).normal(size=(20, 3))
    c = kmeans(fm(x), 1)
    assert np.allclose(c.centers[0], x.mean(0))
    assert c.wcss == pytest.approx(((x - x.mean(0)) ** 2).sum())


def test_k_exceeds_n():
    with pytest.raises(KExceedsN):
        kmeans(fm([[0.0], [1.0]]), 3)
    with pytest.raises(KExceedsN):
        kmedoids(fm([[0.0], [1.0]]), 3)


def blobs(k, per, spread, sep, seed=0):
    rng = np.random.default_rng(seed)
    centers = np.eye(k) * sep
    x = np.vstack([c + rng.normal(scale=spread, size=(per, k)) for c in centers])
    return x, np.repeat(np.arange(k), per)


def test_well_separated_groups_recovered():
    x, truth = blobs(9, 20, 0.1, 5.0)
    c = best_kmeans(fm(x), 9, seed=0)
    assert adjusted_rand_index(c.labels, truth) >= 0.95


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 6))
def test_wcss_trace_non_increasing_and_fixpoint(seed, k):
    x = np.random.default_rng(seed).random((30, 3))
    c = kmeans(fm(x), k, seed=seed)
    trace = c.wcss_trace
    assert all(b <= a + 1e-9 for a, b in zip(trace, trace[1:]))
    # one more Lloyd step changes nothing
    d = ((x[:, None, :] - c.centers[None, :, :]) ** 2).sum(2)
    assert np.array_equal(d.argmin(1), c.labels)
    for j in range(k):
        assert np.allclose(c.centers[j], x[c.labels == j].mean(0))
    assert sum(c.sizes) == 30


def test_kmeans_bit_identical_on_repeat():
    x = np.random.default_rng(5).random((40, 4))
    a, b = kmeans(fm(x), 4, seed=9), kmeans(fm(x), 4, seed=9)
    assert np.array_equal(a.labels, b.labels) and a.wcss == b.wcss


def test_pam_medoid_of_three_collinear_points():
    # summed squared distances: 0 -> 101, 1 -> 82, 10 -> 181
    c = kmedoids(fm([0.0, 1.0, 10.0]), 1)
    assert c.medoids == [1]
    assert c.wcss == 82.0


def test_pam_k_equals_n():
    c = kmedoids(fm([0.0, 1.0, 10.0, 3.0]), 4)
    assert sorted(c.medoids) == [0, 1, 2, 3] and c.wcss == 0.0


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 4))
def test_pam_swap_never_worsens_and_is_deterministic(seed, k):
    x = np.random.default_rng(seed).random((12, 2))
    c = kmedoids(fm(x), k, seed)
    assert c.wcss <= c.build_cost + 1e-12
    assert all(0 <= m < 12 for m in c.medoids)
    again = kmedoids(fm(x), k, seed)
    assert c.medoids == again.medoids


def test_pam_matches_exhaustive_search_on_small_sets():
    x = np.random.default_rng(11).random((9, 2))
    d = ((x[:, None] - x[None]) ** 2).sum(2)
    best = min(d[:, list(m)].min(1).sum() for m in itertools.combinations(range(9), 2))
    assert kmedoids(fm(x), 2).wcss == pytest.approx(best)


def test_silhouette_hand_fixture():
    x = fm([0.0, 1.0, 100.0, 101.0])
    good = silhouette(x, labelled([0, 0, 1, 1]))
    # a = 1, b = 100.5 or 99.5
    expected = np.mean([99.5 / 100.5, 98.5 / 99.5, 98.5 / 99.5, 99.5 / 100.5])
    assert good == pytest.approx(expected) and good > 0.9
    crossed = silhouette(x, labelled([0, 1, 0, 1]))
    assert crossed < 0


def test_silhouette_singletons_and_single_cluster():
    assert silhouette(fm([0.0, 1.0, 2.0]), labelled([0, 1, 2])) == 0.0
    with pytest.raises(SingleCluster):
        silhouette(fm([0.0, 1.0]), labelled([0, 0]))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_silhouette_matches_direct_formula(seed):
    rng = np.random.default_rng(seed)
    x = rng.random((15, 2))
    labels = rng.integers(0, 3, 15)
    if len(set(labels.tolist())) < 2:
        return
    s = silhouette_samples(x, labels)
    for i in range(15):
        own = [j for j in range(15) if labels[j] == labels[i] and j != i]
        if not own:
            assert s[i] == 0
            continue
        dist = lambda j: float(np.linalg.norm(x[i] - x[j]))
        a = np.mean([dist(j) for j in own])
        b = min(np.mean([dist(j) for j in range(15) if labels[j] == c]) for c in set(labels.tolist()) - {labels[i]})
        assert s[i] == pytest.approx((b - a) / max(a, b))
    assert -1 <= s.mean() <= 1


def test_select_k_two_groups_and_singleton_range():
    x, _ = blobs(2, 15, 0.05, 3.0)
    assert select_k(fm(x), (2, 6), 0, 3).best_k == 2
    sel = select_k(fm(x), (2, 2), 0, 3)
    assert sel.best_k == 2 and set(sel.silhouettes) == {2}
    with pytest.raises(KExceedsN):
        select_k(fm(x), (2, 31))


def test_profile_contractor_lift():
    contract = ["contractor"] * 3 + ["permanent"] * 7
    d = make_dataset({"contract_type": contract, "site": ["hq"] * 10})
    prof = profile_clusters(d, labelled([0, 0, 0] + [1] * 7))
    first = prof.clusters[0]
    hit = [x for x in first.distinguishing if x.attribute == "contract_type"][0]
    assert hit.value == "contractor" and hit.prevalence == 1.0
    assert hit.lift == pytest.approx(1 / 0.3)
    assert all(x.attribute != "site" for c in prof.clusters for x in c.distinguishing)
    assert first.label == "1" and first.narrative() == "All members have contract_type = contractor."


def test_profile_matching_global_distribution_has_no_distinctions():
    d = make_dataset({"a": ["x", "y"] * 4})
    prof = profile_clusters(d, labelled([0, 0, 1, 1, 0, 0, 1, 1]))
    assert all(c.distinguishing == [] for c in prof.clusters)
