"""Time the numba kernels against their numpy twins.

Usage::

    python3 benchmarks/bench_kernels.py [--repeat 5]

Each kernel is called once to trigger compilation, then timed over
``--repeat`` runs; the table reports the best time per path and checks that
both paths return the same result.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from cbmcause import _kernels
from cbmcause.regress import Kind, RegressorSpec, fit


def _best(fn, args, repeat):
    fn(*args)
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def _cases():
    rng = np.random.default_rng(0)
    n, p = 5000, 8
    X = np.ascontiguousarray(rng.normal(size=(n, p)))
    y = np.sin(X[:, 0]) + X[:, 1] * X[:, 2] + rng.normal(size=n)
    rows = np.arange(n, dtype=np.int64)
    feats = np.arange(p, dtype=np.int64)
    yield "best_split (n=5000, p=8)", "best_split", (X, y, rows, feats, 3)

    m = fit(RegressorSpec(Kind.RANDOM_FOREST, {"trees": 100}), X[:2000], y[:2000])
    P = m.params
    yield "forest_predict (100 trees, 5000 rows)", "forest_predict", (
        P["feature"], P["threshold"], P["left"], P["right"], P["value"], P["roots"], X,
    )

    values = rng.normal(size=1 << 16)
    yield "shapley_from_values (p=16)", "shapley_from_values", (values, 16)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if _kernels.numba_kernels is None:
        print("numba is not installed; only the numpy path is available")
        return 1
    print(f"{'kernel':40s} {'numpy s':>10s} {'numba s':>10s} {'speed-up':>9s}  same")
    for label, key, call_args in _cases():
        t_np, out_np = _best(_kernels.numpy_kernels[key], call_args, args.repeat)
        t_nb, out_nb = _best(_kernels.numba_kernels[key], call_args, args.repeat)
        if isinstance(out_np, tuple):
            same = out_np[:2] == out_nb[:2]
        else:
            same = bool(np.allclose(out_np, out_nb, rtol=0, atol=1e-12))
        print(f"{label:40s} {t_np:10.5f} {t_nb:10.5f} {t_np / t_nb:8.1f}x  {same}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
