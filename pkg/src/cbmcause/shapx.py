"""Shapley attributions for fitted models and the O/N/M/C trend labels.

The value of a coalition ``S`` for an instance ``x`` is the model's average
output over the background rows with the columns in ``S`` overwritten by
``x``'s values (interventional masking). With the default single-row
background of training means this is the model evaluated at a hybrid point.
"""

from __future__ import annotations

import csv
import enum
import io
import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.stats import spearmanr

from . import _kernels
from .regress import FittedModel, Kind, SHORT_NAMES, predict

MAX_EXACT_FEATURES = 20
_CHUNK_ROWS = 1 << 16


class TooManyFeatures(ValueError):
    pass


class ConstantFeature(ValueError):
    pass


class ValueFunction:
    """Coalition values ``f_x(S)`` for one instance, memoised by bitmask."""

    def __init__(self, model: Callable[[np.ndarray], np.ndarray], background, instance):
        self.model = model
        bg = np.atleast_2d(np.asarray(background, dtype=float))
        self.instance = np.asarray(instance, dtype=float).ravel()
        if bg.shape[1] != self.instance.shape[0]:
            raise ValueError("background and instance widths differ")
        if not (np.isfinite(bg).all() and np.isfinite(self.instance).all()):
            raise ValueError("non-finite background or instance")
        self.background = bg
        self.p = self.instance.shape[0]
        self._memo: dict[int, float] = {}

    def _rows_for(self, masks: np.ndarray) -> np.ndarray:
        bits = ((masks[:, None] >> np.arange(self.p)) & 1).astype(bool)
        b = self.background.shape[0]
        rows = np.repeat(bits, b, axis=0)
        bg = np.tile(self.background, (len(masks), 1))
        return np.where(rows, self.instance, bg)

    def values(self, masks: Sequence[int]) -> np.ndarray:
        masks = np.asarray(masks, dtype=np.int64)
        todo = np.array(sorted({int(m) for m in masks if int(m) not in self._memo}), dtype=np.int64)
        b = self.background.shape[0]
        per_chunk = max(1, _CHUNK_ROWS // b)
        for start in range(0, len(todo), per_chunk):
            chunk = todo[start:start + per_chunk]
            preds = np.asarray(self.model(self._rows_for(chunk)), dtype=float)
            means = preds.reshape(len(chunk), b).mean(axis=1)
            for m, v in zip(chunk, means):
                self._memo[int(m)] = float(v)
        return np.array([self._memo[int(m)] for m in masks])

    def __call__(self, subset: Sequence[int]) -> float:
        mask = 0
        for i in subset:
            mask |= 1 << int(i)
        return float(self.values([mask])[0])

    def full(self) -> float:
        return float(self.values([(1 << self.p) - 1])[0])

    def empty(self) -> float:
        return float(self.values([0])[0])


class Method(str, enum.Enum):
    EXACT = "exact"
    SAMPLED = "sampled"


@dataclass
class ShapExplanation:
    phi0: float
    phi: np.ndarray
    feature_names: tuple[str, ...]
    method: Method
    n_permutations: int | None = None
    seed: int | None = None
    diagnostics: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        doc = {"phi0": self.phi0, "phi": self.phi.tolist(), "method": self.method.value}
        if self.method is Method.SAMPLED:
            doc.update(n_permutations=self.n_permutations, seed=self.seed)
        return doc


def shap_exact(vf: ValueFunction, feature_names: Sequence[str] | None = None) -> ShapExplanation:
    """Shapley values by enumerating all ``2**p`` coalitions."""
    p = vf.p
    if p > MAX_EXACT_FEATURES:
        raise TooManyFeatures(f"p={p} exceeds the exact cap of {MAX_EXACT_FEATURES}")
    names = tuple(feature_names) if feature_names is not None else tuple(f"x{i}" for i in range(p))
    if p == 0:
        return ShapExplanation(vf.empty(), np.zeros(0), names, Method.EXACT)
    values = vf.values(np.arange(1 << p))
    phi = _kernels.shapley_from_values(values, p)
    return ShapExplanation(float(values[0]), phi, names, Method.EXACT)


def _prefix_masks(perm: np.ndarray) -> np.ndarray:
    masks = np.zeros(len(perm) + 1, dtype=np.int64)
    acc = 0
    for k, i in enumerate(perm):
        acc |= 1 << int(i)
        masks[k + 1] = acc
    return masks


def shap_sampled(
    vf: ValueFunction,
    n_perm: int,
    seed: int = 0,
    feature_names: Sequence[str] | None = None,
) -> ShapExplanation:
    """Permutation estimate of the Shapley values.

    Permutations are drawn in antithetic pairs (each one followed by its
    reverse). When ``n_perm`` reaches ``p!`` for ``p <= 8`` every permutation
    is used once instead, which gives the exact values. Any residual left in
    the efficiency identity is spread over the features in proportion to
    ``|phi|`` and reported in ``diagnostics["residual"]``.
    """
    if n_perm < 1:
        raise ValueError("n_perm must be at least 1")
    p = vf.p
    names = tuple(feature_names) if feature_names is not None else tuple(f"x{i}" for i in range(p))
    if p == 0:
        return ShapExplanation(vf.empty(), np.zeros(0), names, Method.SAMPLED, n_perm, seed)
    if p <= 8 and n_perm >= math.factorial(p):
        perms = np.array(list(itertools.permutations(range(p))), dtype=np.int64)
        enumerated = True
    else:
        rng = np.random.default_rng(seed)
        half = (n_perm + 1) // 2
        fwd = np.array([rng.permutation(p) for _ in range(half)], dtype=np.int64)
        perms = np.empty((2 * half, p), dtype=np.int64)
        perms[0::2] = fwd
        perms[1::2] = fwd[:, ::-1]
        perms = perms[:n_perm]
        enumerated = False
    all_masks = np.array([_prefix_masks(pi) for pi in perms])
    vals = vf.values(all_masks.ravel()).reshape(all_masks.shape)
    contrib = np.diff(vals, axis=1)
    phi = np.zeros(p)
    for k in range(p):
        np.add.at(phi, perms[:, k], contrib[:, k])
    phi /= len(perms)
    phi0 = vf.empty()
    residual = vf.full() - phi0 - phi.sum()
    weights = np.abs(phi)
    if weights.sum() > 0:
        phi = phi + residual * weights / weights.sum()
    else:
        phi = phi + residual / p
    diag = {"residual": float(residual), "enumerated": enumerated, "n_evaluated": int(len(perms))}
    return ShapExplanation(phi0, phi, names, Method.SAMPLED, n_perm, seed, diag)


# ----------------------------------------------------------------------------
# trend labels
# ----------------------------------------------------------------------------


class Trend(str, enum.Enum):
    O = "O"  # noqa: E741 - label names are the published codes
    N = "N"
    M = "M"
    C = "C"


@dataclass(frozen=True)
class TrendThresholds:
    rank_corr: float = 0.3
    mid_margin_sd: float = 0.1


@dataclass(frozen=True)
class TrendLabel:
    label: Trend
    spearman: float
    tercile_means: tuple[float, float, float]

    def to_json(self) -> dict:
        return {"label": self.label.value, "spearman": self.spearman, "tercile_means": list(self.tercile_means)}


def classify_trend(feature_values, phis, thresholds: TrendThresholds | None = None) -> TrendLabel:
    """Label how a feature's attribution moves with its value.

    ``O`` when the rank correlation between value and attribution is at least
    ``+rank_corr``, ``N`` when at most ``-rank_corr``. Otherwise ``M`` if the
    middle third (by feature value) has a mean attribution above both outer
    thirds by ``mid_margin_sd`` standard deviations of the attributions, and
    ``C`` if not.
    """
    th = thresholds or TrendThresholds()
    v = np.asarray(feature_values, dtype=float).ravel()
    phi = np.asarray(phis, dtype=float).ravel()
    if v.shape != phi.shape:
        raise ValueError("feature_values and phis differ in length")
    if len(v) < 10:
        raise ValueError("need at least 10 points")
    if np.ptp(v) == 0:
        raise ConstantFeature("feature is constant")
    order = np.argsort(v, kind="mergesort")
    thirds = np.array_split(phi[order], 3)
    terc = tuple(float(t.mean()) for t in thirds)
    if np.ptp(phi) == 0:
        return TrendLabel(Trend.C, 0.0, terc)
    rho = float(spearmanr(v, phi).statistic)
    if rho >= th.rank_corr:
        label = Trend.O
    elif rho <= -th.rank_corr:
        label = Trend.N
    else:
        margin = th.mid_margin_sd * float(phi.std(ddof=1))
        if terc[1] - terc[0] >= margin and terc[1] - terc[2] >= margin:
            label = Trend.M
        else:
            label = Trend.C
    return TrendLabel(label, rho, terc)


# ----------------------------------------------------------------------------
# whole-dataset explanations
# ----------------------------------------------------------------------------


@dataclass
class DatasetExplanation:
    feature_names: tuple[str, ...]
    explanations: list[ShapExplanation]
    values: np.ndarray
    importance: dict[str, float]
    trends: dict[str, TrendLabel | None]
    model_kind: str

    @property
    def ranking(self) -> list[str]:
        return sorted(self.feature_names, key=lambda f: (-self.importance[f], self.feature_names.index(f)))

    @property
    def phi_matrix(self) -> np.ndarray:
        return np.array([e.phi for e in self.explanations])

    def to_json(self) -> dict:
        feats = {}
        for f in self.feature_names:
            t = self.trends[f]
            feats[f] = {
                "importance": self.importance[f],
                "trend": t.label.value if t else None,
                "spearman": t.spearman if t else None,
                "tercile_profile": list(t.tercile_means) if t else None,
            }
        return {
            "format_version": 1,
            "model_kind": self.model_kind,
            "ranking": self.ranking,
            "features": feats,
            "instances": [e.to_json() for e in self.explanations],
        }

    def beeswarm_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["feature", "value", "phi"])
        phi = self.phi_matrix
        for j, f in enumerate(self.feature_names):
            for i in range(phi.shape[0]):
                w.writerow([f, repr(float(self.values[i, j])), repr(float(phi[i, j]))])
        return buf.getvalue()


def explain_dataset(
    model,
    ds,
    method: str | Method = Method.EXACT,
    seed: int = 0,
    n_perm: int = 1000,
    background: str | np.ndarray = "mean",
    thresholds: TrendThresholds | None = None,
    rows: Sequence[int] | None = None,
) -> DatasetExplanation:
    """Explain every row of ``ds`` (or the given ``rows``) under ``model``.

    ``model`` is a :class:`~cbmcause.regress.FittedModel` or a
    :class:`~cbmcause.causal2stage.CausalModel`; for the latter the outcome
    stage is explained over its inputs, confounders and treatment. The
    background is the training means (``"mean"``), the full dataset
    (``"data"``) or an explicit matrix.
    """
    fitted = getattr(model, "psi2", model)
    if not isinstance(fitted, FittedModel):
        raise TypeError("model must be a FittedModel or CausalModel")
    names = fitted.feature_names
    X = ds.matrix(list(names))
    if rows is not None:
        X = X[np.asarray(list(rows), dtype=int)]
    if isinstance(background, str):
        if background == "mean":
            bg = fitted.feature_means.reshape(1, -1)
        elif background == "data":
            bg = ds.matrix(list(names))
        else:
            raise ValueError(f"unknown background {background!r}")
    else:
        bg = np.atleast_2d(np.asarray(background, dtype=float))
    method = Method(method)

    def f(M):
        return predict(fitted, M)

    expl = []
    for i, x in enumerate(X):
        vf = ValueFunction(f, bg, x)
        if method is Method.EXACT:
            expl.append(shap_exact(vf, names))
        else:
            expl.append(shap_sampled(vf, n_perm, seed + i, names))
    phi = np.array([e.phi for e in expl]).reshape(len(expl), len(names))
    importance = {n: float(np.abs(phi[:, j]).mean()) for j, n in enumerate(names)}
    trends: dict[str, TrendLabel | None] = {}
    for j, n in enumerate(names):
        try:
            trends[n] = classify_trend(X[:, j], phi[:, j], thresholds)
        except ValueError:
            trends[n] = None
    return DatasetExplanation(tuple(names), expl, X, importance, trends, fitted.kind.value)


def trend_table(results: dict[str, DatasetExplanation], feature_labels: dict[str, str] | None = None) -> str:
    """Pipe-separated table of trend labels, one row per feature, one column per explainer."""
    kinds = list(results)
    headers = [SHORT_NAMES.get(Kind(k), k) if k in Kind._value2member_map_ else k for k in kinds]
    lines = [" | ".join(["Factor", *headers])]
    first = results[kinds[0]]
    for feat in first.ranking:
        label = (feature_labels or {}).get(feat, feat)
        cells = []
        for k in kinds:
            t = results[k].trends.get(feat)
            cells.append(t.label.value if t else "-")
        lines.append(" | ".join([label, *cells]))
    return "\n".join(lines) + "\n"


def trends_csv(results: dict[str, DatasetExplanation]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    kinds = list(results)
    buf.write("# format_version: 1\n")
    w.writerow(["feature", *kinds])
    for feat in results[kinds[0]].feature_names:
        row = [feat]
        for k in kinds:
            t = results[k].trends.get(feat)
            row.append(t.label.value if t else "")
        w.writerow(row)
    return buf.getvalue()


def dumps(results: dict[str, DatasetExplanation]) -> str:
    return json.dumps({"format_version": 1, "explainers": {k: v.to_json() for k, v in results.items()}}, indent=1)
