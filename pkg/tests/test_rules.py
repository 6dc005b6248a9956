import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from orgminer.cluster import Clustering, profile_clusters
from orgminer.dataset import AttributeSpec, Codebook, Dataset
from orgminer.errors import ConsequentNotCategorical, SearchSpaceTooLarge, UnknownCluster
from orgminer.rules import (
    Item,
    RuleParams,
    RuleSet,
    apriori,
    brute_force_rules,
    discretize,
    gri,
    gri_all_consequents,
    j_measure,
    link_rules_to_clusters,
)

from conftest import make_dataset

WIDE = 10_000


def random_fixture(seed, n_rows=None, n_attrs=4, levels=3):
    rng = np.random.default_rng(seed)
    n = n_rows or int(rng.integers(8, 65))
    cols = {f"q{j}": [f"v{x}" for x in rng.integers(0, levels, n)] for j in range(n_attrs - 1)}
    # the consequent leans on q0 so high-confidence rules exist
    cols["cluster"] = [
        f"c{int(v[1]) % 2}" if rng.random() < 0.8 else f"c{int(rng.integers(0, 2))}" for v in cols["q0"]
    ]
    return make_dataset(cols)


def scan_count(dataset, items):
    return sum(all(r[a] == v for a, v in items) for r in dataset.records())


def scan_support(dataset, items):
    return scan_count(dataset, items) / dataset.n_rows


def exhaustive_itemsets(dataset, min_support):
    universe = [(s.name, c) for s in dataset.codebook for c in s.categories]
    out = {}
    for k in range(1, len(dataset.codebook) + 1):
        for combo in itertools.combinations(universe, k):
            if len({a for a, _ in combo}) < k:
                continue
            sup = scan_support(dataset, combo)
            if sup >= min_support and sup > 0:
                out[frozenset(Item(a, v) for a, v in combo)] = sup
    return out


# apriori


def test_item_in_every_row():
    d = make_dataset({"x": ["yes"] * 4, "y": ["a", "b", "a", "b"]})
    assert apriori(d, 0.5)[frozenset({Item("x", "yes")})] == 1.0
    assert apriori(d, 1.01) == {}


def test_eight_rows_five_items_exact():
    d = make_dataset(
        {
            "p": ["a", "a", "b", "b", "a", "a", "b", "a"],
            "q": ["x", "y", "x", "y", "x", "x", "x", "y"],
            "r": ["on", "on", "on", "off", "off", "on", "on", "on"],
        }
    )
    assert len({(s.name, c) for s in d.codebook for c in s.categories}) <= 6
    assert apriori(d, 0.25) == exhaustive_itemsets(d, 0.25)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 100_000), st.sampled_from([0.05, 0.1, 0.2, 0.3]))
def test_apriori_matches_exhaustive(seed, min_support):
    d = random_fixture(seed)
    found = apriori(d, min_support)
    assert found == exhaustive_itemsets(d, min_support)
    for itemset in found:
        for k in range(1, len(itemset)):
            for sub in itertools.combinations(itemset, k):
                assert frozenset(sub) in found


# J-measure


def j_oracle(p_a, q, p_c):
    def term(x, y):
        return 0.0 if x == 0 else x * math.log(x / y, 2)

    return p_a * (term(q, p_c) + term(1 - q, 1 - p_c))


@settings(max_examples=100, deadline=None)
@given(st.floats(0.01, 1), st.floats(0, 1), st.floats(0.01, 0.99))
def test_j_measure(p_a, q, p_c):
    j = j_measure(p_a, q, p_c)
    assert j >= 0
    assert j == pytest.approx(max(0.0, j_oracle(p_a, q, p_c)), abs=1e-12)
    assert j_measure(p_a, p_c, p_c) == pytest.approx(0.0, abs=1e-12)


# rule search


def test_exclusive_item_gives_confidence_one_rule():
    d = make_dataset(
        {
            "x": ["1", "1", "1", "0", "0", "0", "0", "0"],
            "z": ["a", "b", "a", "b", "a", "b", "a", "b"],
            "cluster": ["7", "7", "7", "7", "3", "3", "3", "3"],
        }
    )
    rules = gri(d, "cluster", RuleParams(min_support=0.1))
    top = rules.rules[0]
    assert top.antecedent == (Item("x", "1"),) and top.consequent == Item("cluster", "7")
    assert top.confidence == 1.0 and top.cover == 3 and top.support == 3 / 8


def check_against_scan(dataset, ruleset):
    for r in ruleset:
        a = [(i.attribute, i.value) for i in r.antecedent]
        ac = a + [(r.consequent.attribute, r.consequent.value)]
        n_a, n_ac = scan_count(dataset, a), scan_count(dataset, ac)
        assert r.support == n_ac / dataset.n_rows
        assert r.confidence == n_ac / n_a
        assert r.cover == n_a
        assert (r.confidence == 1.0) == (n_a == n_ac)
        assert r.support <= min(n_a, scan_count(dataset, ac[-1:])) / dataset.n_rows
        assert r.consequent.attribute not in {i.attribute for i in r.antecedent}
        assert len({i.attribute for i in r.antecedent}) == len(r.antecedent)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 100_000), st.sampled_from([0.6, 0.8, 1.0]), st.sampled_from([0.02, 0.05, 0.1]))
def test_gri_equals_brute_force_with_wide_beam(seed, conf, sup):
    d = random_fixture(seed, n_attrs=5)
    params = RuleParams(min_support=sup, min_confidence=conf, beam_width=WIDE, top_n=WIDE)
    beam = gri(d, "cluster", params)
    brute = brute_force_rules(d, "cluster", params)
    assert beam.rules == brute.rules
    check_against_scan(d, beam)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 100_000), st.integers(1, 4))
def test_narrow_beam_never_invents_rules(seed, width):
    d = random_fixture(seed, n_attrs=5)
    params = RuleParams(min_support=0.02, min_confidence=0.7, beam_width=width, top_n=WIDE)
    beam = set(gri(d, "cluster", params).rules)
    assert beam <= set(brute_force_rules(d, "cluster", params).rules)


def test_top_n_and_confidence_cap_on_planted_data(planted):
    data, _ = planted
    binned, _ = discretize(data)
    rules = gri(binned, "department", RuleParams(top_n=100, min_confidence=1.0))
    assert 0 < len(rules) <= 100
    assert all(r.confidence == 1.0 for r in rules)
    assert gri(binned, "department", RuleParams()).rules == rules.rules


def test_ranking_order():
    d = random_fixture(7, n_rows=60, n_attrs=5)
    rules = gri(d, "cluster", RuleParams(min_support=0.02, min_confidence=0.5, beam_width=WIDE, top_n=WIDE)).rules
    keys = [(-r.confidence, -r.support, len(r.antecedent)) for r in rules]
    assert keys == sorted(keys)


def test_degenerate_inputs():
    d = random_fixture(3)
    assert len(brute_force_rules(d.take([]), "cluster")) == 0
    assert len(gri(d.take([]), "cluster")) == 0
    assert len(brute_force_rules(d, "cluster", RuleParams(max_antecedent_len=0))) == 0
    assert len(gri(d, "cluster", RuleParams(max_antecedent_len=0))) == 0
    numeric = make_dataset({"x": [1, 2], "c": ["a", "b"]}, {"x": "numeric"})
    with pytest.raises(ConsequentNotCategorical):
        gri(numeric, "x")


def test_search_space_guard():
    specs = tuple(AttributeSpec(f"a{i}", "categorical", tuple(f"v{j}" for j in range(10))) for i in range(30))
    specs += (AttributeSpec("cluster", "binary", ("1", "2")),)
    d = Dataset(Codebook(specs), ())
    with pytest.raises(SearchSpaceTooLarge):
        brute_force_rules(d, "cluster")


def test_all_consequents_merges_and_ranks():
    d = random_fixture(11, n_rows=50, n_attrs=4)
    params = RuleParams(min_support=0.05, min_confidence=0.9, beam_width=WIDE, top_n=40)
    merged = gri_all_consequents(d, params)
    union = set()
    for spec in d.codebook:
        union |= set(brute_force_rules(d, spec.name, RuleParams(0.05, 0.9, 3, WIDE, WIDE)).rules)
    assert set(merged.rules) <= union
    assert len(merged) == min(40, len(union))
    keys = [(-r.confidence, -r.support, len(r.antecedent)) for r in merged]
    assert keys == sorted(keys)
    best = sorted(union, key=lambda r: (-r.confidence, -r.support, len(r.antecedent)))[:1]
    assert (best[0].confidence, best[0].support) == (merged.rules[0].confidence, merged.rules[0].support)


def test_ruleset_round_trip_and_matching():
    d = random_fixture(5, n_rows=40)
    rules = gri(d, "cluster", RuleParams(min_support=0.05, min_confidence=0.6))
    again = RuleSet.from_dict(rules.to_dict())
    assert again.rules == rules.rules
    record = next(d.records())
    assert all(r.matches(record) and r.confidence == 1.0 for r in rules.matching(record))
    assert rules.to_markdown().startswith("| Rule | Results |")


# discretization


def test_quartile_bins():
    d = make_dataset({"year": list(range(2000, 2016)), "c": ["a", "b"] * 8}, {"year": "numeric"})
    binned, disc = discretize(d, 4)
    spec = binned.codebook["year"]
    assert spec.kind == "ordinal" and len(spec.categories) == 4
    assert spec.categories[0].startswith("2000..") and spec.categories[-1].endswith("..2015")
    counts = [binned.column("year").count(c) for c in spec.categories]
    assert counts == [4, 4, 4, 4]
    assert disc.apply_record({"year": 2000, "c": "a"})["year"] == spec.categories[0]
    assert disc.apply_record({"year": 1990})["year"] == spec.categories[0]
    assert disc.apply_record({"year": 2030})["year"] == spec.categories[-1]


# linking


def test_link_rules_to_profiles():
    d = make_dataset(
        {
            "field": ["executive_mgmt"] * 3 + ["it"] * 3,
            "living": ["west"] * 3 + ["east"] * 3,
            "contract": ["contractor"] * 3 + ["permanent"] * 3,
            "cluster": ["1"] * 3 + ["2"] * 3,
        }
    )
    profile = profile_clusters(d.drop_columns(["cluster"]), Clustering("fixed", 2, np.array([0, 0, 0, 1, 1, 1]), 0.0, 0))
    rules = brute_force_rules(d, "cluster", RuleParams(min_support=0.1))
    target = [r for r in rules if len(r.antecedent) == 3 and r.consequent.value == "1"][0]
    report = link_rules_to_clusters([target], profile)
    rule_text, result = report.rows[0]
    assert rule_text == "field = executive_mgmt and living = west and contract = contractor"
    assert result.startswith("They are in cluster 1. ") and profile.clusters[0].narrative() in result
    assert report.to_markdown().splitlines()[0] == "| Rule | Results |"
    assert len(link_rules_to_clusters([], profile)) == 0
    orphan = rules.rules[0].__class__((Item("field", "it"),), Item("cluster", "9"), 0.5, 1.0, 0.1, 3, 0.5)
    with pytest.raises(UnknownCluster):
        link_rules_to_clusters([orphan], profile)
