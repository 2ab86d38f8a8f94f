"""Conditional-independence tests: partial correlation with Fisher's z.

:class:`FisherZTester` precomputes the correlation matrix once and answers
``test(x, y, z)`` queries from its submatrices. :class:`DSeparationTester`
answers the same queries from a known DAG and stands in for the statistical
test when checking discovery logic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.stats import rankdata

from .dataset import Dataset
from .graph import MixedGraph, d_separated

_CLAMP = 1.0 - 1e-12
_JITTER = 1e-10


class CiError(Exception):
    pass


class SingularCorrelationMatrix(CiError):
    pass


class TooFewSamples(CiError):
    pass


class DegreesOfFreedomExhausted(CiError):
    pass


@dataclass(frozen=True)
class CiDecision:
    rho: float
    statistic: float
    p_value: float
    independent: bool
    alpha: float

    def to_json(self) -> dict:
        return {
            "rho": self.rho,
            "statistic": self.statistic,
            "p_value": self.p_value,
            "independent": self.independent,
            "alpha": self.alpha,
        }


def normal_cdf(x: float) -> float:
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def _partial_from_corr(corr: np.ndarray) -> float:
    """Partial correlation of the first two variables given the rest."""
    if corr.shape[0] == 2:
        return float(corr[0, 1])
    try:
        prec = np.linalg.inv(corr)
        ok = np.isfinite(prec).all() and np.linalg.cond(corr) < 1e12
    except np.linalg.LinAlgError:
        ok = False
    if not ok:
        try:
            prec = np.linalg.inv(corr + _JITTER * np.eye(corr.shape[0]))
        except np.linalg.LinAlgError:
            raise SingularCorrelationMatrix("correlation submatrix is singular") from None
        if not np.isfinite(prec).all():
            raise SingularCorrelationMatrix("correlation submatrix is singular")
    denom = math.sqrt(prec[0, 0] * prec[1, 1])
    if not denom > 0:
        raise SingularCorrelationMatrix("non-positive precision diagonal")
    return float(-prec[0, 1] / denom)


def clamp_rho(rho: float) -> float:
    return min(max(rho, -_CLAMP), _CLAMP)


def partial_correlation(ds: Dataset, x: str, y: str, z: Iterable[str] = (), method: str = "pearson") -> float:
    """Partial correlation of columns ``x`` and ``y`` given columns ``z``.

    Inverts the correlation submatrix over ``{x, y} | z``; when that matrix is
    numerically singular a ridge of 1e-10 is added to its diagonal first.
    The result is clamped to ``[-1 + 1e-12, 1 - 1e-12]``; use
    :func:`partial_correlation_raw` for the unclamped value.
    """
    return clamp_rho(partial_correlation_raw(ds, x, y, z, method))


def partial_correlation_raw(ds: Dataset, x: str, y: str, z: Iterable[str] = (), method: str = "pearson") -> float:
    z = list(z)
    if x == y:
        raise CiError("x and y must differ")
    if x in z or y in z:
        raise CiError("x and y must not be in the conditioning set")
    if ds.n <= len(z) + 3:
        raise TooFewSamples(f"n={ds.n} too small for |z|={len(z)}")
    data = ds.matrix([x, y, *z])
    if method == "spearman":
        data = np.column_stack([rankdata(c) for c in data.T])
    elif method != "pearson":
        raise ValueError(f"unknown method {method!r}")
    with np.errstate(invalid="ignore", divide="ignore"):
        corr = np.corrcoef(data, rowvar=False)
    if not np.isfinite(corr).all():
        raise SingularCorrelationMatrix("constant column in test")
    return _partial_from_corr(np.atleast_2d(corr))


def fisher_z_test(rho: float, n: int, k: int, alpha: float = 0.05) -> CiDecision:
    """Two-sided Fisher z test of ``rho == 0`` with ``k`` conditioning variables."""
    dof = n - k - 3
    if dof <= 0:
        raise DegreesOfFreedomExhausted(f"n - k - 3 = {dof}")
    if not abs(rho) < 1.0:
        raise CiError("|rho| must be below 1")
    stat = math.sqrt(dof) * abs(math.atanh(rho))
    p = math.erfc(stat / math.sqrt(2.0))
    p = min(max(p, 0.0), 1.0)
    return CiDecision(float(rho), stat, p, p > alpha, alpha)


class FisherZTester:
    """Gaussian CI test over a dataset, with per-query caching."""

    def __init__(self, ds: Dataset, alpha: float = 0.05, method: str = "pearson"):
        if not 0.0 < alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")
        self.alpha = alpha
        self.method = method
        self.n = ds.n
        self.names = ds.names
        self._pos = {c: i for i, c in enumerate(self.names)}
        data = ds.values
        if method == "spearman":
            data = np.column_stack([rankdata(c) for c in data.T])
        elif method != "pearson":
            raise ValueError(f"unknown method {method!r}")
        with np.errstate(invalid="ignore", divide="ignore"):
            self._corr = np.atleast_2d(np.corrcoef(data, rowvar=False))
        self._cache: dict[tuple, CiDecision] = {}

    def testable(self, k: int) -> bool:
        return self.n - k - 3 > 0

    def test(self, x: str, y: str, z: Iterable[str] = ()) -> CiDecision:
        z = tuple(sorted(z, key=self._pos.__getitem__))
        a, b = sorted((x, y), key=self._pos.__getitem__)
        key = (a, b, z)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        idx = [self._pos[v] for v in (a, b, *z)]
        sub = self._corr[np.ix_(idx, idx)]
        if not np.isfinite(sub).all():
            raise SingularCorrelationMatrix(f"constant column among {a, b, *z}")
        rho = clamp_rho(_partial_from_corr(sub))
        dec = fisher_z_test(rho, self.n, len(z), self.alpha)
        self._cache[key] = dec
        return dec


class DSeparationTester:
    """Perfect CI answers read off a DAG (optionally over an observed subset)."""

    def __init__(self, dag: MixedGraph, observed: Sequence[str] | None = None, alpha: float = 0.05):
        self.dag = dag
        self.names = list(observed) if observed is not None else list(dag.nodes)
        self.alpha = alpha
        self.n = math.inf
        self.calls = 0

    def testable(self, k: int) -> bool:
        return True

    def test(self, x: str, y: str, z: Iterable[str] = ()) -> CiDecision:
        self.calls += 1
        if d_separated(self.dag, x, y, z):
            return CiDecision(0.0, 0.0, 1.0, True, self.alpha)
        return CiDecision(1.0, math.inf, 0.0, False, self.alpha)
