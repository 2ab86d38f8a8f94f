import csv
import io
import json

import numpy as np
import pytest

from cbmcause.causal2stage import RoleBinding
from cbmcause.dataset import Dataset, Role, VariableMeta
from cbmcause.evaluate import (
    METRIC_COLUMNS,
    ConstantTruth,
    EvalError,
    NodeSetMismatch,
    compare_protocol,
    correlation_variables,
    graph_score,
    regression_metrics,
)
from cbmcause.graph import parse_notation
from cbmcause.regress import Kind, RegressorSpec


def test_regression_metrics_hand_values():
    m = regression_metrics([1.0, 2.0, 3.0], [1.0, 2.0, 5.0])
    assert m.mae == pytest.approx(2 / 3)
    assert m.mse == pytest.approx(4 / 3)
    assert m.r2 == pytest.approx(1 - 4 / 2)
    assert regression_metrics([1, 2], [1, 2]).r2 == 1.0


def test_regression_metrics_errors():
    with pytest.raises(ConstantTruth) as exc:
        regression_metrics([2.0, 2.0], [1.0, 3.0])
    assert exc.value.mae == 1.0 and exc.value.mse == 1.0
    with pytest.raises(EvalError):
        regression_metrics([1.0, 2.0], [1.0])
    with pytest.raises(EvalError):
        regression_metrics([1.0], [1.0])


def test_graph_score_counts():
    true = parse_notation("# nodes: A B C D\nA --> B\nB --> C\nC <-> D\n")
    est = parse_notation("# nodes: A B C D\nA o-> B\nB <-- C\nA o-o D\n")
    s = graph_score(true, est)
    assert s.skeleton_precision == pytest.approx(2 / 3)
    assert s.skeleton_recall == pytest.approx(2 / 3)
    assert s.skeleton_f1 == pytest.approx(2 / 3)
    # missing C-D, extra A-D, both endpoints of B-C wrong; circles free
    assert s.shd == 4
    assert graph_score(true, est, strict=True).shd == 5
    assert graph_score(true, true).shd == 0


def test_graph_score_empty_and_mismatch():
    e = parse_notation("# nodes: A B\n")
    s = graph_score(e, e)
    assert (s.skeleton_precision, s.skeleton_recall, s.skeleton_f1) == (1.0, 1.0, 1.0)
    assert graph_score(e, parse_notation("A --> B\n")).skeleton_precision == 0.0
    with pytest.raises(NodeSetMismatch):
        graph_score(e, parse_notation("# nodes: A C\n"))


def _ds(n=300, seed=0):
    rng = np.random.default_rng(seed)
    w = rng.normal(size=n)
    t = w + 0.5 * rng.normal(size=n)
    p1 = t + 0.05 * rng.normal(size=n)
    p2 = t + 0.05 * rng.normal(size=n)
    x = rng.normal(size=n)
    y = t + x ** 2 + 0.1 * rng.normal(size=n)
    names = {"W": Role.GEOLOGICAL, "T": Role.TREATMENT, "P1": Role.ENGINEERING, "P2": Role.ENGINEERING,
             "X": Role.ENGINEERING, "Y": Role.OUTPUT}
    return Dataset(tuple(VariableMeta(k, r) for k, r in names.items()), np.column_stack([w, t, p1, p2, x, y]))


def test_correlation_variables_rank_by_abs_r_on_given_rows():
    ds = _ds()
    top = correlation_variables(ds, "Y", 3)
    assert set(top) == {"T", "P1", "P2"}
    assert "X" not in top
    assert len(correlation_variables(ds, "Y", 2, rows=range(100))) == 2


def test_compare_protocol_table():
    ds = _ds()
    specs = [RegressorSpec(Kind.LINEAR), RegressorSpec(Kind.RANDOM_FOREST, {"trees": 10})]
    b = RoleBinding("T", ("W",), ("X",), "Y")
    table = compare_protocol(ds, ["T", "X"], specs=specs, seed=1, binding=b)
    assert [r.label for r in table.rows] == ["LR", "LR^causal", "LR^two-stage", "RF", "RF^causal", "RF^two-stage"]
    assert set(table.corr_vars) < {"T", "P1", "P2"} and len(table.corr_vars) == 2
    assert len(table.train_rows) + len(table.test_rows) == ds.n
    rf, rfc = table.row("RF"), table.row("RF^causal")
    assert rfc.r2_test > rf.r2_test
    for c in METRIC_COLUMNS:
        assert rf.best[c] != rfc.best[c] or getattr(rf, c) == getattr(rfc, c)
    lines = table.render().splitlines()
    assert lines[0] == "Method | R2 train | MAE train | MSE train | R2 test | MAE test | MSE test"
    assert lines[1].startswith("LR | ")
    assert all(len(cell.split(".")[-1]) == 3 for cell in lines[1].split(" | ")[1:])
    text = table.to_csv()
    assert text.startswith("# format_version: 1\n")
    rows = list(csv.DictReader(io.StringIO(text.split("\n", 1)[1])))
    assert float(rows[4]["r2_test"]) == rfc.r2_test
    assert json.loads(table.dumps())["n_test"] == len(table.test_rows)
    with pytest.raises(KeyError):
        table.row("SVR")


def test_compare_protocol_is_deterministic_and_validates():
    ds = _ds(120)
    specs = [RegressorSpec(Kind.RANDOM_FOREST, {"trees": 5})]
    a = compare_protocol(ds, ["T", "X"], specs=specs, seed=3).to_csv()
    assert a == compare_protocol(ds, ["T", "X"], specs=specs, seed=3).to_csv()
    with pytest.raises(EvalError):
        compare_protocol(ds, [], specs=specs)
    with pytest.raises(EvalError):
        compare_protocol(ds, ["Q"], specs=specs)
    with pytest.raises(EvalError):
        compare_protocol(ds, ["Y"], specs=specs)
