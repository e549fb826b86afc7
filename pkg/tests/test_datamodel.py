import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fitruth.datamodel import (
    Dataset,
    FeatureKind,
    as_instance,
    dump_dataset,
    dump_schema,
    feature_stats,
    load_dataset,
    parse_kind,
    parse_schema,
)
from fitruth.errors import ContractError, ParseError, SchemaError

SCHEMA = "a = continuous\nb = binary\nc = ordinal 1 2 3\ny = label\n"


def load(text, schema=SCHEMA):
    return load_dataset(io.StringIO(text), parse_schema(schema))


def two_pass(col):
    mean = sum(col) / len(col)
    return mean, math.sqrt(sum((v - mean) ** 2 for v in col) / len(col))


def test_load_splits_label_and_kinds():
    ds = load("a,b,c,y\n0.5,1,2,1\n1.5,0,3,0\n")
    assert ds.feature_names == ["a", "b", "c"]
    assert [f.kind for f in ds.features] == [FeatureKind.CONTINUOUS, FeatureKind.BINARY, FeatureKind.ORDINAL]
    assert ds.labels.tolist() == [1, 0]
    assert ds.label_name == "y"
    assert ds.features[2].levels == (1.0, 2.0, 3.0)


def test_column_order_follows_header_not_schema():
    ds = load("y,c,a,b\n1,2,0.5,1\n")
    assert ds.feature_names == ["c", "a", "b"]


@pytest.mark.parametrize("text, row, column", [
    ("a,b,c,y\n0.5,,2,1\n", 1, "b"),
    ("a,b,c,y\n0.5,1,2,1\nx,1,2,0\n", 2, "a"),
    ("a,b,c,y\n0.5,2,2,1\n", 1, "b"),
    ("a,b,c,y\n0.5,1,7,1\n", 1, "c"),
    ("a,b,c,y\n0.5,1,2,0.5\n", 1, "y"),
    ("a,b,c,y\nnan,1,2,1\n", 1, "a"),
])
def test_bad_cells_report_row_and_column(text, row, column):
    with pytest.raises(ParseError) as info:
        load(text)
    assert info.value.row == row
    assert info.value.column == column


def test_wrong_arity_reports_row():
    with pytest.raises(ParseError) as info:
        load("a,b,c,y\n0.5,1,2,1\n0.5,1\n")
    assert info.value.row == 2


def test_schema_and_header_must_agree():
    with pytest.raises(SchemaError):
        load("a,b,c,y,z\n0.5,1,2,1,0\n")
    with pytest.raises(SchemaError):
        load("a,b,y\n0.5,1,1\n")


def test_empty_inputs_rejected():
    with pytest.raises(ParseError):
        load("")
    with pytest.raises(ParseError):
        load("a,b,c,y\n")


@pytest.mark.parametrize("text", ["bogus", "ordinal", "ordinal 3 2", "ordinal a b", ""])
def test_bad_kinds(text):
    with pytest.raises(SchemaError):
        parse_kind(text)


def test_two_labels_rejected():
    with pytest.raises(SchemaError):
        parse_schema("y = label\nz = label\n")


def test_schema_keeps_name_case():
    assert "Variance" in parse_schema("Variance = continuous\n")


def test_single_row_has_zero_spread():
    ds = Dataset.from_arrays([[0.0, 0.0]])
    assert ds.stds.tolist() == [0.0, 0.0]
    assert ds.means.tolist() == [0.0, 0.0]


def test_population_statistics():
    ds = Dataset.from_arrays([[1.0], [2.0], [3.0]])
    meta = feature_stats(ds, 0)
    assert meta.mean == 2.0
    assert meta.std_dev == pytest.approx(math.sqrt(2 / 3), abs=1e-15)
    assert (meta.observed_min, meta.observed_max) == (1.0, 3.0)


def test_gaussian_sample_statistics_match_two_pass_oracle():
    col = np.random.default_rng(3).normal(5.0, 2.0, size=5000)
    meta = Dataset.from_arrays(col[:, None]).features[0]
    mean, std = two_pass(col.tolist())
    assert meta.mean == pytest.approx(mean, abs=1e-12)
    assert meta.std_dev == pytest.approx(std, abs=1e-12)
    assert abs(meta.mean - 5.0) < 0.1 and abs(meta.std_dev - 2.0) < 0.1


def test_feature_stats_index_checked():
    ds = Dataset.from_arrays([[1.0]])
    with pytest.raises(IndexError):
        feature_stats(ds, 1)
    with pytest.raises(IndexError):
        ds.instance(5)


def test_rows_are_read_only():
    ds = Dataset.from_arrays([[1.0, 2.0]])
    with pytest.raises(ValueError):
        ds.rows[0, 0] = 3.0
    x = ds.instance(0)
    x[0] = 9.0
    assert ds.rows[0, 0] == 1.0


def test_as_instance_arity():
    assert as_instance([1, 2], 2).tolist() == [1.0, 2.0]
    with pytest.raises(ContractError):
        as_instance([1, 2, 3], 2)


finite = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.lists(finite, min_size=3, max_size=3), min_size=1, max_size=30),
       st.lists(st.sampled_from([0, 1]), min_size=30, max_size=30))
def test_dump_reload_round_trip(rows, labels):
    ds = Dataset.from_arrays(rows, ["p", "q", "r"], labels=labels[:len(rows)], label_name="y")
    again = load_dataset(io.StringIO(dump_dataset(ds)), parse_schema(dump_schema(ds)))
    assert np.array_equal(again.rows, ds.rows)
    assert again.labels.tolist() == ds.labels.tolist()
    np.testing.assert_allclose(again.means, ds.means, rtol=0, atol=1e-12)
    np.testing.assert_allclose(again.stds, ds.stds, rtol=0, atol=1e-12)


def test_round_trip_keeps_kinds():
    ds = load("a,b,c,y\n0.5,1,2,1\n1.5,0,3,0\n")
    again = load_dataset(io.StringIO(dump_dataset(ds)), parse_schema(dump_schema(ds)))
    assert [f.kind for f in again.features] == [f.kind for f in ds.features]
    assert again.features[2].levels == ds.features[2].levels


@settings(max_examples=40, deadline=None)
@given(st.lists(finite, min_size=2, max_size=40), st.randoms(use_true_random=False))
def test_statistics_ignore_row_order(col, rnd):
    shuffled = list(col)
    rnd.shuffle(shuffled)
    a = Dataset.from_arrays(np.array(col)[:, None]).features[0]
    b = Dataset.from_arrays(np.array(shuffled)[:, None]).features[0]
    assert a.mean == pytest.approx(b.mean, abs=1e-9 * (1 + abs(a.mean)))
    assert a.std_dev == pytest.approx(b.std_dev, rel=1e-9, abs=1e-9)


def test_subset_recomputes_statistics():
    ds = Dataset.from_arrays([[1.0], [2.0], [3.0], [10.0]], labels=[0, 1, 0, 1])
    sub = ds.subset([0, 1, 2])
    assert sub.means[0] == 2.0
    assert sub.labels.tolist() == [0, 1, 0]


def test_bundled_data_shape(banknote):
    assert banknote.n_features == 4
    assert banknote.n_rows == 1372
    assert banknote.feature_names == ["variance", "skew", "curtosis", "entropy"]
    assert set(banknote.labels.tolist()) == {0, 1}
