"""Four interchangeable regressors behind one ``fit`` / ``predict`` contract.

* ``Linear``: ordinary least squares with an intercept, through the normal
  equations (a 1e-8 ridge is added only when they are singular).
* ``RandomForest``: bagged CART regression trees, variance-reduction splits,
  a random feature subset per split.
* ``Mlp``: one tanh hidden layer, linear output, full-batch gradient descent on
  half the mean squared error.
* ``Svr``: linear epsilon-insensitive regression trained by subgradient descent.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

import numpy as np

from . import _kernels

FORMAT_VERSION = 1


class Kind(str, enum.Enum):
    LINEAR = "Linear"
    RANDOM_FOREST = "RandomForest"
    MLP = "Mlp"
    SVR = "Svr"


SHORT_NAMES = {Kind.LINEAR: "LR", Kind.SVR: "SVR", Kind.MLP: "MLP", Kind.RANDOM_FOREST: "RF"}

DEFAULTS: dict[Kind, dict[str, Any]] = {
    Kind.LINEAR: {},
    Kind.RANDOM_FOREST: {
        "trees": 100,
        "depth": None,
        "min_leaf": 3,
        "features_per_split": None,
        "bootstrap": True,
    },
    Kind.MLP: {"hidden_units": 16, "learning_rate": 0.1, "epochs": 2000},
    Kind.SVR: {"epsilon": 0.1, "penalty": 1.0, "learning_rate": 0.5, "epochs": 1000, "kernel": "linear"},
}


class RegressError(Exception):
    pass


class UnknownHyperparameter(RegressError):
    pass


class SingularDesign(RegressError):
    pass


class NonFiniteLoss(RegressError):
    def __init__(self, kind: str, iteration: int):
        self.iteration = iteration
        super().__init__(f"{kind} loss became non-finite at iteration {iteration}")


class FeatureMismatch(RegressError):
    pass


@dataclass(frozen=True)
class RegressorSpec:
    kind: Kind
    hyperparams: Mapping[str, Any] = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        object.__setattr__(self, "hyperparams", dict(self.hyperparams))

    def resolved(self) -> dict[str, Any]:
        allowed = DEFAULTS[self.kind]
        unknown = sorted(set(self.hyperparams) - set(allowed))
        if unknown:
            raise UnknownHyperparameter(f"{self.kind.value} does not take {unknown}")
        hp = dict(allowed)
        hp.update(self.hyperparams)
        if self.kind is Kind.SVR and hp["kernel"] != "linear":
            raise RegressError("only the linear kernel is supported")
        return hp

    def to_json(self) -> dict:
        return {"kind": self.kind.value, "hyperparams": dict(self.hyperparams), "seed": self.seed}

    @classmethod
    def from_json(cls, doc: Mapping) -> "RegressorSpec":
        return cls(Kind(doc["kind"]), doc.get("hyperparams", {}), int(doc.get("seed", 0)))


@dataclass
class FittedModel:
    kind: Kind
    hyperparams: dict[str, Any]
    params: dict[str, Any]
    feature_names: tuple[str, ...]
    feature_means: np.ndarray
    seed: int = 0

    @property
    def p(self) -> int:
        return len(self.feature_names)

    def __call__(self, X) -> np.ndarray:
        return predict(self, X)

    def to_json(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "kind": self.kind.value,
            "hyperparams": self.hyperparams,
            "seed": self.seed,
            "feature_names": list(self.feature_names),
            "feature_means": self.feature_means.tolist(),
            "params": {k: _encode(v) for k, v in self.params.items()},
        }

    @classmethod
    def from_json(cls, doc: Mapping) -> "FittedModel":
        return cls(
            kind=Kind(doc["kind"]),
            hyperparams=dict(doc["hyperparams"]),
            params={k: _decode(v) for k, v in doc["params"].items()},
            feature_names=tuple(doc["feature_names"]),
            feature_means=np.asarray(doc["feature_means"], dtype=float),
            seed=int(doc.get("seed", 0)),
        )

    def dumps(self) -> str:
        return json.dumps(self.to_json())


def _encode(v):
    if isinstance(v, np.ndarray):
        return {"dtype": str(v.dtype), "shape": list(v.shape), "data": v.ravel().tolist()}
    return v


def _decode(v):
    if isinstance(v, dict) and "dtype" in v:
        return np.asarray(v["data"], dtype=v["dtype"]).reshape(v["shape"])
    return v


# ----------------------------------------------------------------------------
# public API
# ----------------------------------------------------------------------------


def fit(spec: RegressorSpec, X, y, feature_names: Sequence[str] | None = None) -> FittedModel:
    hp = spec.resolved()
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    n, p = X.shape
    if y.shape[0] != n:
        raise RegressError(f"X has {n} rows, y has {y.shape[0]}")
    if not (np.isfinite(X).all() and np.isfinite(y).all()):
        raise RegressError("non-finite training data")
    if feature_names is None:
        feature_names = [f"x{i}" for i in range(p)]
    if len(feature_names) != p:
        raise FeatureMismatch(f"{len(feature_names)} names for {p} columns")
    if spec.kind is Kind.LINEAR and n < p + 1:
        raise SingularDesign(f"need at least {p + 1} rows, got {n}")
    if n < 2 and p > 0:
        raise RegressError(f"need at least 2 rows, got {n}")
    means = X.mean(axis=0) if p else np.zeros(0)

    if p == 0:
        params = {"constant": float(np.mean(y))}
    elif spec.kind is Kind.LINEAR:
        params = _fit_linear(X, y)
    elif spec.kind is Kind.RANDOM_FOREST:
        params = _fit_forest(X, y, hp, spec.seed)
    elif spec.kind is Kind.MLP:
        params = _fit_mlp(X, y, hp, spec.seed)
    else:
        params = _fit_svr(X, y, hp)
    return FittedModel(spec.kind, hp, params, tuple(feature_names), means, spec.seed)


def predict(m: FittedModel, X, feature_names: Sequence[str] | None = None) -> np.ndarray:
    """Predict for a ``k x p`` matrix whose columns follow ``m.feature_names``."""
    if feature_names is not None and tuple(feature_names) != m.feature_names:
        raise FeatureMismatch(f"expected features {list(m.feature_names)}, got {list(feature_names)}")
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(1, -1) if m.p > 0 and X.shape[0] == m.p else X.reshape(-1, 1)
    if X.ndim != 2 or X.shape[1] != m.p:
        raise FeatureMismatch(f"expected {m.p} columns, got shape {X.shape}")
    if "constant" in m.params:
        return np.full(X.shape[0], m.params["constant"])
    if m.kind is Kind.LINEAR:
        return m.params["intercept"] + X @ m.params["coef"]
    if m.kind is Kind.RANDOM_FOREST:
        return _kernels.forest_predict(
            m.params["feature"], m.params["threshold"], m.params["left"],
            m.params["right"], m.params["value"], m.params["roots"], np.ascontiguousarray(X),
        )
    if m.kind is Kind.MLP:
        return _mlp_forward(_mlp_unpack(m.params), X)[0]
    return m.params["intercept"] + X @ m.params["coef"]


# ----------------------------------------------------------------------------
# linear
# ----------------------------------------------------------------------------


def _fit_linear(X, y):
    A = np.column_stack([np.ones(len(y)), X])
    gram = A.T @ A
    rhs = A.T @ y
    beta = None
    if np.linalg.cond(gram) < 1e12:
        try:
            beta = np.linalg.solve(gram, rhs)
        except np.linalg.LinAlgError:
            beta = None
    if beta is None:
        try:
            beta = np.linalg.solve(gram + 1e-8 * np.eye(gram.shape[0]), rhs)
        except np.linalg.LinAlgError:
            raise SingularDesign("normal equations singular after ridge jitter") from None
    if not np.isfinite(beta).all():
        raise SingularDesign("normal equations singular after ridge jitter")
    return {"intercept": float(beta[0]), "coef": beta[1:].copy()}


# ----------------------------------------------------------------------------
# CART / random forest
# ----------------------------------------------------------------------------


def _grow_tree(X, y, rows, hp, rng, p):
    """Grow one tree; returns parallel lists (feature, threshold, left, right, value)."""
    k = hp["features_per_split"] or max(1, math.ceil(p / 3))
    k = min(int(k), p)
    max_depth = hp["depth"]
    min_leaf = int(hp["min_leaf"])
    feature, threshold, left, right, value = [], [], [], [], []

    def new_node():
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(0.0)
        return len(feature) - 1

    root = new_node()
    stack = [(root, rows, 0)]
    while stack:
        node, idx, depth = stack.pop()
        value[node] = float(np.mean(y[idx]))
        if (max_depth is not None and depth >= max_depth) or len(idx) < 2 * min_leaf:
            continue
        feats = np.sort(rng.choice(p, size=k, replace=False)) if k < p else np.arange(p)
        f, thr, _ = _kernels.best_split(X, y, idx, feats.astype(np.int64), min_leaf)
        if f < 0:
            continue
        mask = X[idx, f] <= thr
        li, ri = idx[mask], idx[~mask]
        feature[node] = int(f)
        threshold[node] = float(thr)
        left[node] = new_node()
        right[node] = new_node()
        stack.append((right[node], ri, depth + 1))
        stack.append((left[node], li, depth + 1))
    return feature, threshold, left, right, value


def _fit_forest(X, y, hp, seed):
    n, p = X.shape
    X = np.ascontiguousarray(X)
    feature, threshold, left, right, value, roots = [], [], [], [], [], []
    for t in range(int(hp["trees"])):
        rng = np.random.default_rng([seed, t])
        if hp["bootstrap"]:
            rows = np.sort(rng.integers(0, n, size=n)).astype(np.int64)
        else:
            rows = np.arange(n, dtype=np.int64)
        f, th, le, ri, va = _grow_tree(X, y, rows, hp, rng, p)
        off = len(feature)
        roots.append(off)
        feature.extend(f)
        threshold.extend(th)
        left.extend(c + off if c >= 0 else -1 for c in le)
        right.extend(c + off if c >= 0 else -1 for c in ri)
        value.extend(va)
    return {
        "feature": np.asarray(feature, dtype=np.int64),
        "threshold": np.asarray(threshold, dtype=float),
        "left": np.asarray(left, dtype=np.int64),
        "right": np.asarray(right, dtype=np.int64),
        "value": np.asarray(value, dtype=float),
        "roots": np.asarray(roots, dtype=np.int64),
    }


def apply_tree(m: FittedModel, X, tree: int = 0) -> np.ndarray:
    """Leaf node index reached by each row in one tree of a forest."""
    P = m.params
    X = np.asarray(X, dtype=float)
    out = np.empty(X.shape[0], dtype=np.int64)
    for i, row in enumerate(X):
        node = P["roots"][tree]
        while P["feature"][node] >= 0:
            node = P["left"][node] if row[P["feature"][node]] <= P["threshold"][node] else P["right"][node]
        out[i] = node
    return out


# ----------------------------------------------------------------------------
# MLP
# ----------------------------------------------------------------------------


def _mlp_unpack(params):
    return params["W1"], params["b1"], params["W2"], float(params["b2"])


def _mlp_forward(theta, X):
    W1, b1, W2, b2 = theta
    H = np.tanh(X @ W1 + b1)
    return H @ W2 + b2, H


def mlp_loss_and_grad(theta, X, y):
    """Half mean squared error and its gradient with respect to ``(W1, b1, W2, b2)``."""
    W1, b1, W2, b2 = theta
    out, H = _mlp_forward(theta, X)
    n = len(y)
    err = out - y
    loss = 0.5 * float(err @ err) / n
    g_out = err / n
    gW2 = H.T @ g_out
    gb2 = float(g_out.sum())
    g_pre = np.outer(g_out, W2) * (1.0 - H * H)
    gW1 = X.T @ g_pre
    gb1 = g_pre.sum(axis=0)
    return loss, (gW1, gb1, gW2, gb2)


def mlp_init(p: int, hidden: int, seed: int):
    rng = np.random.default_rng(seed)
    a1 = 1.0 / math.sqrt(p)
    a2 = 1.0 / math.sqrt(hidden)
    W1 = rng.uniform(-a1, a1, size=(p, hidden))
    b1 = rng.uniform(-a1, a1, size=hidden)
    W2 = rng.uniform(-a2, a2, size=hidden)
    b2 = float(rng.uniform(-a2, a2))
    return W1, b1, W2, b2


def _fit_mlp(X, y, hp, seed):
    n, p = X.shape
    W1, b1, W2, b2 = mlp_init(p, int(hp["hidden_units"]), seed)
    lr = float(hp["learning_rate"])
    for it in range(int(hp["epochs"])):
        loss, (gW1, gb1, gW2, gb2) = mlp_loss_and_grad((W1, b1, W2, b2), X, y)
        if not math.isfinite(loss):
            raise NonFiniteLoss("Mlp", it)
        W1 = W1 - lr * gW1
        b1 = b1 - lr * gb1
        W2 = W2 - lr * gW2
        b2 = b2 - lr * gb2
    loss, _ = mlp_loss_and_grad((W1, b1, W2, b2), X, y)
    if not math.isfinite(loss):
        raise NonFiniteLoss("Mlp", int(hp["epochs"]))
    return {"W1": W1, "b1": b1, "W2": W2, "b2": float(b2)}


# ----------------------------------------------------------------------------
# SVR
# ----------------------------------------------------------------------------


def svr_objective(w, b, X, y, epsilon, penalty):
    """Mean epsilon-insensitive loss plus ``|w|^2 / (2 n C)`` with ``C = penalty``."""
    n = len(y)
    resid = y - X @ w - b
    return float(np.maximum(np.abs(resid) - epsilon, 0.0).mean() + (w @ w) / (2.0 * n * penalty))


def _fit_svr(X, y, hp):
    n, p = X.shape
    eps = float(hp["epsilon"])
    C = float(hp["penalty"])
    lr = float(hp["learning_rate"])
    w = np.zeros(p)
    b = 0.0
    best = (svr_objective(w, b, X, y, eps, C), w.copy(), b)
    for it in range(int(hp["epochs"])):
        resid = y - X @ w - b
        outside = np.abs(resid) > eps
        s = np.where(outside, -np.sign(resid), 0.0) / n
        gw = X.T @ s + w / (n * C)
        gb = float(s.sum())
        step = lr / math.sqrt(it + 1.0)
        w = w - step * gw
        b = b - step * gb
        obj = svr_objective(w, b, X, y, eps, C)
        if not math.isfinite(obj):
            raise NonFiniteLoss("Svr", it)
        if obj < best[0]:
            best = (obj, w.copy(), b)
    return {"intercept": float(best[2]), "coef": best[1]}
