import json
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cbmcause.dataset import (
    Dataset,
    DatasetError,
    DegenerateColumnWarning,
    EmptyTable,
    HeaderMetaMismatch,
    MissingFile,
    NonNumericCell,
    Role,
    TooFewRows,
    VariableMeta,
    dump_meta,
    load_csv,
    load_meta,
    split,
    split_indices,
    standardize,
    write_csv,
)

META = {"a": "Geological", "b": {"role": "engineering", "unit": "m3"}, "y": "Output"}


def _write(tmp_path, text, name="d.csv"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


def _ds(n=10, seed=0):
    rng = np.random.default_rng(seed)
    cols = (VariableMeta("a", Role.GEOLOGICAL), VariableMeta("b", Role.ENGINEERING), VariableMeta("y", Role.OUTPUT))
    return Dataset(cols, rng.normal(size=(n, 3)))


def test_role_parse_is_case_insensitive_and_idempotent():
    assert Role.parse(" treatment ") is Role.TREATMENT
    assert Role.parse(Role.OUTPUT) is Role.OUTPUT
    with pytest.raises(ValueError):
        Role.parse("Lithology")


def test_load_csv_reads_values_and_roles(tmp_path):
    p = _write(tmp_path, "a,b,y\n1,2,3\n4,5,6\n")
    ds = load_csv(p, META)
    assert ds.names == ["a", "b", "y"]
    assert ds.meta("b").unit == "m3"
    assert ds.output_name() == "y"
    np.testing.assert_array_equal(ds.values, [[1, 2, 3], [4, 5, 6]])


def test_load_csv_accepts_a_meta_path_and_column_order_follows_header(tmp_path):
    p = _write(tmp_path, "y,a,b\n1,2,3\n4,5,6\n")
    m = tmp_path / "m.json"
    m.write_text(json.dumps(META))
    ds = load_csv(p, m)
    assert ds.names == ["y", "a", "b"]
    assert ds.meta("y").role is Role.OUTPUT


def test_load_csv_errors(tmp_path):
    with pytest.raises(MissingFile):
        load_csv(tmp_path / "nope.csv", META)
    with pytest.raises(EmptyTable):
        load_csv(_write(tmp_path, "a,b,y\n"), META)
    with pytest.raises(HeaderMetaMismatch):
        load_csv(_write(tmp_path, "a,b,z\n1,2,3\n"), META)
    with pytest.raises(NonNumericCell):
        load_csv(_write(tmp_path, "a,b,y\n1,x,3\n"), META)
    with pytest.raises(NonNumericCell):
        load_csv(_write(tmp_path, "a,b,y\n1,,3\n"), META)
    with pytest.raises(NonNumericCell):
        load_csv(_write(tmp_path, "a,b,y\n1,inf,3\n"), META)
    with pytest.raises(DatasetError):
        load_csv(_write(tmp_path, "a,b,y\n1,2\n"), META)


def test_missing_mean_fills_column_mean(tmp_path):
    ds = load_csv(_write(tmp_path, "a,b,y\n1,2,3\n3,,5\n5,8,NA\n"), META, missing="mean")
    assert ds.values[1, 1] == 5.0
    assert ds.values[2, 2] == 4.0


def test_meta_round_trip(tmp_path):
    ds = _ds()
    dump_meta(ds.columns, tmp_path / "m.json")
    back = load_meta(tmp_path / "m.json")
    assert [back[c] for c in ds.names] == list(ds.columns)


def test_write_csv_round_trip_is_exact(tmp_path):
    ds = _ds(25)
    write_csv(ds, tmp_path / "x.csv")
    assert load_csv(tmp_path / "x.csv", {c.name: c for c in ds.columns}) == ds


def test_dataset_is_immutable_and_validated():
    ds = _ds()
    with pytest.raises(ValueError):
        ds.values[0, 0] = 1.0
    with pytest.raises(DatasetError):
        Dataset(ds.columns, np.full((2, 3), np.nan))
    with pytest.raises(DatasetError):
        Dataset(ds.columns[:2], np.zeros((2, 3)))
    with pytest.raises(EmptyTable):
        Dataset(ds.columns, np.zeros((0, 3)))


@given(st.integers(2, 60), st.floats(0.01, 0.99), st.integers(0, 10_000))
def test_split_partitions_rows(n, frac, seed):
    tr, te = split_indices(n, frac, seed)
    assert len(tr) + len(te) == n
    assert 1 <= len(te) <= n - 1
    assert sorted(np.concatenate([tr, te]).tolist()) == list(range(n))
    assert list(tr) == sorted(tr) and list(te) == sorted(te)
    tr2, te2 = split_indices(n, frac, seed)
    assert np.array_equal(tr, tr2) and np.array_equal(te, te2)


def test_split_errors_and_subsets():
    with pytest.raises(TooFewRows):
        split_indices(1, 0.5, 0)
    with pytest.raises(ValueError):
        split_indices(10, 1.0, 0)
    train, test = split(_ds(10), 0.3, 1)
    assert (train.n, test.n) == (7, 3)


def test_standardize_moments_and_constant_column():
    rng = np.random.default_rng(0)
    cols = (VariableMeta("a", Role.GEOLOGICAL), VariableMeta("c", Role.GEOLOGICAL))
    ds = Dataset(cols, np.column_stack([rng.normal(5, 3, 50), np.full(50, 2.0)]))
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        z = standardize(ds)
    assert any(issubclass(x.category, DegenerateColumnWarning) for x in w)
    assert abs(z.values[:, 0].mean()) < 1e-12
    assert abs(z.values[:, 0].std(ddof=1) - 1.0) < 1e-12
    assert np.all(z.values[:, 1] == 0.0)


def test_standardize_keeps_named_columns_raw():
    rng = np.random.default_rng(1)
    cols = (VariableMeta("a", Role.GEOLOGICAL), VariableMeta("y", Role.OUTPUT))
    ds = Dataset(cols, rng.normal(4, 2, size=(40, 2)))
    z = standardize(ds, keep=["y"])
    assert np.array_equal(z.column("y"), ds.column("y"))
    assert abs(z.column("a").mean()) < 1e-12
    with pytest.raises(DatasetError):
        standardize(ds, keep=["nope"])


def test_output_name_requires_exactly_one():
    cols = (VariableMeta("a", Role.GEOLOGICAL), VariableMeta("b", Role.GEOLOGICAL))
    with pytest.raises(DatasetError):
        Dataset(cols, np.zeros((2, 2))).output_name()
