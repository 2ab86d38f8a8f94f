"""Hot numeric kernels with a numba path and a pure-numpy path.

Every kernel exists twice: a loop version written for ``numba.njit`` and a
vectorised numpy version. Both follow the same floating-point summation order
where the callers rely on exact agreement (tree split search, forest
averaging). The module-level names ``best_split``, ``forest_predict`` and
``shapley_from_values`` point at whichever path is active.
"""

from __future__ import annotations

import numpy as np

from ._accel import HAVE_NUMBA, USE_NUMBA, njit

# ----------------------------------------------------------------------------
# CART split search
# ----------------------------------------------------------------------------


def _best_split_loop(X, y, rows, feats, min_leaf):
    n = rows.shape[0]
    total = 0.0
    for i in range(n):
        total += y[rows[i]]
    parent = total * total / n
    tol = 1e-12 * max(1.0, abs(parent))
    best_f = -1
    best_t = 0.0
    best_gain = 0.0
    xs = np.empty(n)
    ys = np.empty(n)
    for fi in range(feats.shape[0]):
        f = feats[fi]
        for i in range(n):
            xs[i] = X[rows[i], f]
            ys[i] = y[rows[i]]
        order = np.argsort(xs, kind="mergesort")
        left = 0.0
        f_gain = -np.inf
        f_thr = 0.0
        for k in range(n - 1):
            left += ys[order[k]]
            nl = k + 1
            nr = n - nl
            a = xs[order[k]]
            b = xs[order[k + 1]]
            if a == b or nl < min_leaf or nr < min_leaf:
                continue
            right = total - left
            gain = left * left / nl + right * right / nr - parent
            if gain > f_gain:
                f_gain = gain
                f_thr = (a + b) / 2.0
        if f_gain > best_gain + tol:
            best_gain = f_gain
            best_f = f
            best_t = f_thr
    return best_f, best_t, best_gain


def _best_split_numpy(X, y, rows, feats, min_leaf):
    n = rows.shape[0]
    yr = y[rows]
    total = np.cumsum(yr)[-1]
    parent = total * total / n
    tol = 1e-12 * max(1.0, abs(parent))
    best_f, best_t, best_gain = -1, 0.0, 0.0
    if n < 2:
        return best_f, best_t, best_gain
    nl = np.arange(1, n)
    nr = n - nl
    for f in feats:
        xs = X[rows, f]
        order = np.argsort(xs, kind="mergesort")
        xs_s = xs[order]
        left = np.cumsum(yr[order])[:-1]
        right = total - left
        gain = left * left / nl + right * right / nr - parent
        valid = (xs_s[:-1] != xs_s[1:]) & (nl >= min_leaf) & (nr >= min_leaf)
        if not valid.any():
            continue
        gain = np.where(valid, gain, -np.inf)
        k = int(np.argmax(gain))
        if gain[k] > best_gain + tol:
            best_gain = float(gain[k])
            best_f = int(f)
            best_t = float((xs_s[k] + xs_s[k + 1]) / 2.0)
    return best_f, best_t, best_gain


# ----------------------------------------------------------------------------
# Forest prediction over flattened tree arrays
# ----------------------------------------------------------------------------


def _forest_predict_loop(feature, threshold, left, right, value, roots, X):
    n = X.shape[0]
    out = np.zeros(n)
    n_trees = roots.shape[0]
    for t in range(n_trees):
        for i in range(n):
            node = roots[t]
            while feature[node] >= 0:
                if X[i, feature[node]] <= threshold[node]:
                    node = left[node]
                else:
                    node = right[node]
            out[i] += value[node]
    for i in range(n):
        out[i] /= n_trees
    return out


def _forest_predict_numpy(feature, threshold, left, right, value, roots, X):
    n = X.shape[0]
    out = np.zeros(n)
    rows = np.arange(n)
    for root in roots:
        node = np.full(n, root, dtype=np.int64)
        active = feature[node] >= 0
        while active.any():
            idx = rows[active]
            cur = node[idx]
            go_left = X[idx, feature[cur]] <= threshold[cur]
            node[idx] = np.where(go_left, left[cur], right[cur])
            active = feature[node] >= 0
        out += value[node]
    return out / len(roots)


# ----------------------------------------------------------------------------
# Shapley accumulation from a full table of coalition values
# ----------------------------------------------------------------------------


def _shapley_weights(p):
    w = np.empty(max(p, 1))
    # w[s] = s! (p - s - 1)! / p!, built by recurrence to avoid factorial overflow
    if p == 0:
        return w
    w[0] = 1.0 / p
    for s in range(1, p):
        w[s] = w[s - 1] * s / (p - s)
    return w


def _shapley_loop(values, p):
    w = _shapley_weights(p)
    phi = np.zeros(p)
    n_masks = values.shape[0]
    for mask in range(n_masks):
        s = 0
        m = mask
        while m:
            s += m & 1
            m >>= 1
        for i in range(p):
            bit = 1 << i
            if mask & bit == 0:
                phi[i] += w[s] * (values[mask | bit] - values[mask])
    return phi


def _shapley_numpy(values, p):
    w = _weights_py(p)
    masks = np.arange(values.shape[0], dtype=np.int64)
    sizes = np.zeros_like(masks)
    for i in range(p):
        sizes += (masks >> i) & 1
    phi = np.zeros(p)
    for i in range(p):
        bit = 1 << i
        sel = masks[(masks & bit) == 0]
        phi[i] = np.sum(w[sizes[sel]] * (values[sel | bit] - values[sel]))
    return phi


# ----------------------------------------------------------------------------
# dispatch
# ----------------------------------------------------------------------------

numpy_kernels = {
    "best_split": _best_split_numpy,
    "forest_predict": _forest_predict_numpy,
    "shapley_from_values": _shapley_numpy,
}

_weights_py = _shapley_weights

if HAVE_NUMBA:
    # the loop kernel resolves this global when it is first compiled
    _shapley_weights = njit(_shapley_weights)
    numba_kernels = {
        "best_split": njit(_best_split_loop),
        "forest_predict": njit(_forest_predict_loop),
        "shapley_from_values": njit(_shapley_loop),
    }
else:  # pragma: no cover
    numba_kernels = None

_active = numba_kernels if USE_NUMBA else numpy_kernels

best_split = _active["best_split"]
forest_predict = _active["forest_predict"]
shapley_from_values = _active["shapley_from_values"]
