"""Regression metrics, graph-recovery scores and the correlation-vs-causal comparison."""

from __future__ import annotations

import csv
import enum
import io
import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .causal2stage import RoleBinding, fit_causal, predict_causal
from .dataset import Dataset, split_indices
from .graph import Mark, MixedGraph
from .regress import Kind, RegressorSpec, SHORT_NAMES, fit, predict

FORMAT_VERSION = 1


class EvalError(Exception):
    pass


class ConstantTruth(EvalError):
    """``y_true`` is constant so R^2 is undefined; MAE and MSE are attached."""

    def __init__(self, mae: float, mse: float):
        self.mae = mae
        self.mse = mse
        super().__init__(f"constant y_true: r2 undefined (mae={mae}, mse={mse})")


class NodeSetMismatch(EvalError):
    pass


@dataclass(frozen=True)
class RegressionMetrics:
    r2: float
    mae: float
    mse: float


def regression_metrics(y_true, y_pred) -> RegressionMetrics:
    y = np.asarray(y_true, dtype=float).ravel()
    yh = np.asarray(y_pred, dtype=float).ravel()
    if y.shape != yh.shape:
        raise EvalError(f"length mismatch: {y.shape[0]} vs {yh.shape[0]}")
    if y.shape[0] < 2:
        raise EvalError("need at least two points")
    resid = y - yh
    mae = float(np.mean(np.abs(resid)))
    mse = float(np.mean(resid * resid))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot == 0.0:
        raise ConstantTruth(mae, mse)
    return RegressionMetrics(1.0 - float(np.sum(resid * resid)) / ss_tot, mae, mse)


# ----------------------------------------------------------------------------
# graph scoring
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class GraphScore:
    skeleton_precision: float
    skeleton_recall: float
    skeleton_f1: float
    shd: int

    def to_json(self) -> dict:
        return {
            "skeleton_precision": self.skeleton_precision,
            "skeleton_recall": self.skeleton_recall,
            "skeleton_f1": self.skeleton_f1,
            "shd": self.shd,
        }


def _ratio(num: int, den: int, other_den: int) -> float:
    if den:
        return num / den
    return 1.0 if other_den == 0 else 0.0


def graph_score(g_true: MixedGraph, g_est: MixedGraph, strict: bool = False) -> GraphScore:
    """Compare an estimated graph with the true one.

    Skeleton precision and recall are over unordered adjacencies. The SHD
    counts missing and extra adjacencies plus one for every endpoint of a
    shared edge whose estimated mark is committal (tail or arrow) and
    differs from the true mark. With ``strict=True`` circle marks also count
    as mismatches.
    """
    if set(g_true.nodes) != set(g_est.nodes):
        raise NodeSetMismatch(
            f"node sets differ: {sorted(set(g_true.nodes) ^ set(g_est.nodes))}"
        )
    st, se = g_true.skeleton(), g_est.skeleton()
    shared = st & se
    prec = _ratio(len(shared), len(se), len(st))
    rec = _ratio(len(shared), len(st), len(se))
    f1 = 0.0 if prec + rec == 0 else 2 * prec * rec / (prec + rec)
    shd = len(st - se) + len(se - st)
    for pair in sorted(shared, key=lambda p: sorted(g_true.position(v) for v in p)):
        a, b = sorted(pair, key=g_true.position)
        for u, w in ((a, b), (b, a)):
            m_est = g_est.mark_at(u, w)
            if m_est is Mark.CIRCLE and not strict:
                continue
            if m_est is not g_true.mark_at(u, w):
                shd += 1
    return GraphScore(prec, rec, f1, shd)


# ----------------------------------------------------------------------------
# comparison protocol
# ----------------------------------------------------------------------------


class Selection(str, enum.Enum):
    CORRELATION = "correlation"
    CAUSAL = "causal"
    TWO_STAGE = "two-stage"


METRIC_COLUMNS = ("r2_train", "mae_train", "mse_train", "r2_test", "mae_test", "mse_test")
_HEADERS = ("R2 train", "MAE train", "MSE train", "R2 test", "MAE test", "MSE test")


@dataclass
class RegressionReport:
    label: str
    kind: Kind
    selection: Selection
    features: tuple[str, ...]
    r2_train: float
    mae_train: float
    mse_train: float
    r2_test: float
    mae_test: float
    mse_test: float
    best: dict[str, bool] = field(default_factory=dict)

    def values(self) -> tuple[float, ...]:
        return tuple(getattr(self, c) for c in METRIC_COLUMNS)

    def to_json(self) -> dict:
        doc = {
            "label": self.label,
            "kind": self.kind.value,
            "selection": self.selection.value,
            "features": list(self.features),
        }
        doc.update({c: getattr(self, c) for c in METRIC_COLUMNS})
        doc["best"] = dict(self.best)
        return doc


@dataclass
class ComparisonTable:
    rows: list[RegressionReport]
    train_rows: np.ndarray
    test_rows: np.ndarray
    causal_vars: tuple[str, ...]
    corr_vars: tuple[str, ...]
    output: str

    def row(self, label: str) -> RegressionReport:
        for r in self.rows:
            if r.label == label:
                return r
        raise KeyError(label)

    def render(self) -> str:
        """Pipe-separated table, three decimals, one row per method."""
        lines = [" | ".join(("Method", *_HEADERS))]
        for r in self.rows:
            lines.append(" | ".join((r.label, *(f"{v:.3f}" for v in r.values()))))
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# format_version: {FORMAT_VERSION}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["method", "kind", "selection", "features", *METRIC_COLUMNS, *(f"best_{c}" for c in METRIC_COLUMNS)])
        for r in self.rows:
            w.writerow([
                r.label, r.kind.value, r.selection.value, ";".join(r.features),
                *(repr(v) for v in r.values()),
                *(int(r.best.get(c, False)) for c in METRIC_COLUMNS),
            ])
        return buf.getvalue()

    def to_json(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "output": self.output,
            "causal_vars": list(self.causal_vars),
            "corr_vars": list(self.corr_vars),
            "n_train": int(len(self.train_rows)),
            "n_test": int(len(self.test_rows)),
            "rows": [r.to_json() for r in self.rows],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=1)


DEFAULT_SPECS = (
    RegressorSpec(Kind.LINEAR),
    RegressorSpec(Kind.SVR),
    RegressorSpec(Kind.MLP),
    RegressorSpec(Kind.RANDOM_FOREST),
)


def correlation_variables(ds: Dataset, output: str, k: int, rows: Sequence[int] | None = None) -> list[str]:
    """The ``k`` columns with the largest absolute Pearson correlation with ``output``.

    Ties keep column order. Constant columns rank last.
    """
    sub = ds if rows is None else ds.subset_rows(rows)
    y = sub.column(output)
    scored = []
    for j, c in enumerate(sub.names):
        if c == output:
            continue
        x = sub.column(c)
        if np.ptp(x) == 0 or np.ptp(y) == 0:
            r = 0.0
        else:
            r = abs(float(np.corrcoef(x, y)[0, 1]))
        scored.append((-r, j, c))
    scored.sort()
    return [c for _, _, c in scored[:k]]


def _evaluate(label, kind, selection, feats, yhat_tr, y_tr, yhat_te, y_te) -> RegressionReport:
    tr = regression_metrics(y_tr, yhat_tr)
    te = regression_metrics(y_te, yhat_te)
    return RegressionReport(label, kind, selection, tuple(feats), tr.r2, tr.mae, tr.mse, te.r2, te.mae, te.mse)


def _flag_best(a: RegressionReport, b: RegressionReport) -> None:
    for c in METRIC_COLUMNS:
        va, vb = getattr(a, c), getattr(b, c)
        if c.startswith("r2"):
            best = max(va, vb)
        else:
            best = min(va, vb)
        a.best[c] = va == best
        b.best[c] = vb == best


def compare_protocol(
    ds: Dataset,
    causal_vars: Sequence[str],
    corr_vars: Sequence[str] | None = None,
    specs: Sequence[RegressorSpec] = DEFAULT_SPECS,
    test_fraction: float = 0.3,
    seed: int = 0,
    output: str | None = None,
    binding: RoleBinding | None = None,
) -> ComparisonTable:
    """Fit each regressor on correlation-selected and on causal inputs.

    Both arms share one train/test split drawn from ``seed``. When
    ``corr_vars`` is omitted the ``len(causal_vars)`` columns most correlated
    with the output on the training rows are used. For every spec the table
    holds a ``Method`` row (correlation inputs) and a ``Method^causal`` row;
    the better value in each metric column of the pair is flagged in
    ``best``. With a ``binding`` a ``Method^two-stage`` row is added that
    runs the two-stage model in observed-treatment mode.
    """
    output = output or ds.output_name()
    causal_vars = list(causal_vars)
    if not causal_vars:
        raise EvalError("causal variable list is empty")
    missing = [c for c in causal_vars + list(corr_vars or []) if c not in ds.names]
    if missing:
        raise EvalError(f"unknown variables {missing}")
    if output in causal_vars or output in (corr_vars or []):
        raise EvalError("output must not be an input")
    tr, te = split_indices(ds.n, test_fraction, seed)
    if corr_vars is None:
        corr_vars = correlation_variables(ds, output, len(causal_vars), tr)
    corr_vars = list(corr_vars)
    train, test = ds.subset_rows(tr), ds.subset_rows(te)
    y_tr, y_te = train.column(output), test.column(output)
    rows = []
    for spec in specs:
        short = SHORT_NAMES[spec.kind]
        pair = []
        for sel, feats, label in (
            (Selection.CORRELATION, corr_vars, short),
            (Selection.CAUSAL, causal_vars, f"{short}^causal"),
        ):
            m = fit(spec, train.matrix(feats), y_tr, feats)
            pair.append(_evaluate(label, spec.kind, sel, feats, predict(m, train.matrix(feats)), y_tr,
                                  predict(m, test.matrix(feats)), y_te))
        _flag_best(*pair)
        rows.extend(pair)
        if binding is not None:
            cm = fit_causal(train, binding, spec)
            rows.append(_evaluate(f"{short}^two-stage", spec.kind, Selection.TWO_STAGE, binding.stage2_features,
                                  predict_causal(cm, train), y_tr, predict_causal(cm, test), y_te))
    return ComparisonTable(rows, tr, te, tuple(causal_vars), tuple(corr_vars), output)
