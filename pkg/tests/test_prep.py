import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from orgminer.dataset import MISSING, AttributeSpec, Codebook, Dataset
from orgminer.errors import AllMissingColumn
from orgminer.prep import drop_incomplete, impute, outlier_scan, prepare

from conftest import make_dataset


def test_drop_row_with_most_cells_missing():
    specs = tuple(AttributeSpec(f"a{i}", "binary", ("n", "y")) for i in range(43))
    full = tuple("y" for _ in range(43))
    sparse = tuple(MISSING if i < 30 else "y" for i in range(43))
    d = Dataset(Codebook(specs), (full, sparse))
    assert drop_incomplete(d, 0.5).rows == (full,)
    assert drop_incomplete(d, 1.0).rows == d.rows


def test_complete_dataset_unchanged_by_drop():
    d = make_dataset({"a": ["x", "y"], "b": ["y", "y"]})
    for f in (0.0, 0.3, 1.0):
        assert drop_incomplete(d, f).rows == d.rows


def test_mode_and_mean_imputation():
    d = make_dataset({"c": ["A", "A", "B", MISSING], "n": [1, 2, 3, MISSING]}, {"n": "numeric"})
    out = impute(d)
    assert out.column("c")[3] == "A"
    assert out.column("n")[3] == 2.0


def test_mode_tie_goes_to_smallest_category():
    d = make_dataset({"c": ["B", "A", MISSING]})
    assert impute(d).column("c")[2] == "A"


def test_all_missing_column():
    spec = AttributeSpec("c", "categorical", ("A", "B"))
    with pytest.raises(AllMissingColumn):
        impute(Dataset(Codebook((spec,)), ((MISSING,), (MISSING,))))


def test_outlier_flagged_by_robust_z():
    # median 10, MAD 1 -> z(1000) = 990 / 1.4826 = 667.7
    d = make_dataset({"x": [10, 11, 9, 10, 1000]}, {"x": "numeric"})
    report = outlier_scan(d)
    assert [row for row, _, _ in report.flagged["x"]] == [4]
    assert report.flagged["x"][0][2] == pytest.approx(990 / 1.4826)


def test_constant_column_skipped_and_noted():
    d = make_dataset({"x": [10, 10, 10, 10, 1000]}, {"x": "numeric"})
    report = outlier_scan(d)
    assert not report.flagged.get("x")
    assert "x" in report.mad_zero


def test_categorical_only_dataset_has_empty_outlier_report():
    assert outlier_scan(make_dataset({"c": ["A", "B"]})).empty


def test_prepare_reports_imputations():
    d = make_dataset({"c": ["A", MISSING, "A"], "n": [1, 2, MISSING]}, {"n": "numeric"})
    result = prepare(d)
    assert result.dataset.is_complete()
    assert {(i.row, i.column) for i in result.imputations} == {(1, "c"), (2, "n")}


column = st.lists(st.sampled_from(["A", "B", "C", MISSING]), min_size=6, max_size=6).filter(
    lambda c: any(v is not MISSING for v in c)
)
numbers = st.lists(st.one_of(st.integers(0, 50), st.just(MISSING)), min_size=6, max_size=6).filter(
    lambda c: any(v is not MISSING for v in c)
)


def _build(c, n):
    cb = Codebook((AttributeSpec("c", "categorical", ("A", "B", "C")), AttributeSpec("n", "numeric")))
    return Dataset(cb, tuple(zip(c, n)))


@settings(max_examples=80, deadline=None)
@given(column, numbers)
def test_impute_idempotent_and_preserves_observed(c, n):
    d = _build(c, n)
    once = impute(d)
    assert impute(once).rows == once.rows
    for before, after in zip(d.rows, once.rows):
        for x, y in zip(before, after):
            if x is not MISSING:
                assert x == y


@settings(max_examples=80, deadline=None)
@given(column, numbers, st.floats(0, 1), st.floats(0, 1))
def test_drop_incomplete_monotone(c, n, f1, f2):
    d = _build(c, n)
    lo, hi = sorted((f1, f2))
    small = drop_incomplete(d, lo)
    big = drop_incomplete(d, hi)
    assert small.n_rows <= big.n_rows
    assert set(small.rows) <= set(d.rows)
