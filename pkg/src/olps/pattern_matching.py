"""Nonparametric pattern-matching strategies.

Each decision first collects the periods i whose preceding window
x_{i-w}..x_{i-1} resembles the latest window x_{t-w+1}..x_t, then picks the
portfolio maximizing an expected utility over the successors x_i.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.optimize import minimize

from .engine import CostSpec, Strategy, drifted
from .params import Param, positive
from .simplex import (ConvergenceError, ScenarioSet, clean, log_optimal, maximize_on_simplex,
                      uniform)

CATEGORY = "Pattern-Matching Approaches"

METHODS = ("histogram", "kernel", "nearest_neighbor", "correlation")
UTILITIES = ("log_optimal", "semi_log", "markowitz", "gv")


@dataclass(frozen=True)
class SimilaritySet:
    indices: tuple = ()             # 1-based period indices
    probabilities: np.ndarray = None

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise ValueError("indices must be strictly increasing")
        p = self.probabilities
        if p is None:
            p = np.full(len(idx), 1.0 / len(idx)) if idx else np.zeros(0)
        p = np.asarray(p, dtype=float)
        if p.shape != (len(idx),):
            raise ValueError("one probability per index")
        if idx and abs(p.sum() - 1.0) > 1e-12:
            raise ValueError("probabilities must sum to 1")
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "probabilities", p)

    def __len__(self):
        return len(self.indices)


@dataclass(frozen=True)
class SelectorSpec:
    method: str = "kernel"
    w: int = 5
    bins: int = 3
    radius: float = 0.1
    neighbors: int = 10
    rho: float = 0.1

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown selection method {self.method!r}")
        if self.w < 1:
            raise ValueError(f"w must be >= 1, got {self.w}")
        if self.bins < 1:
            raise ValueError(f"bins must be >= 1, got {self.bins}")
        if not self.radius > 0:
            raise ValueError(f"radius must be > 0, got {self.radius}")
        if self.neighbors < 1:
            raise ValueError(f"neighbors must be >= 1, got {self.neighbors}")
        if not -1 < self.rho <= 1:
            raise ValueError(f"rho must be in (-1, 1], got {self.rho}")


@dataclass(frozen=True)
class UtilitySpec:
    kind: str = "log_optimal"
    lam: float = 0.5
    gamma_b: float = 0.001
    gamma_s: float = 0.001

    def __post_init__(self):
        if self.kind not in UTILITIES:
            raise ValueError(f"unknown utility {self.kind!r}")
        if self.lam < 0:
            raise ValueError(f"lambda must be >= 0, got {self.lam}")
        CostSpec(self.gamma_b, self.gamma_s)


def _rows(history) -> np.ndarray:
    return np.asarray(getattr(history, "relatives", history), dtype=float)


def _pearson(windows: np.ndarray, latest: np.ndarray) -> np.ndarray:
    a = windows - windows.mean(axis=1, keepdims=True)
    b = latest - latest.mean()
    sa = np.sqrt((a * a).sum(axis=1))
    sb = np.sqrt(b @ b)
    num = a @ b
    out = np.zeros(len(windows))
    ok = (sa > 0) & (sb > 0)
    out[ok] = num[ok] / (sa[ok] * sb)
    return out


def histogram_keys(rows: np.ndarray, bins: int) -> np.ndarray:
    """Bin index of every entry, using equal-probability bins of all observed relatives."""
    if bins == 1:
        return np.zeros(rows.shape, dtype=int)
    edges = np.quantile(rows, np.arange(1, bins) / bins)
    return np.digitize(rows, edges)


def select_samples(history, spec: SelectorSpec) -> SimilaritySet:
    """Indices i in (w, t] whose preceding w-window matches the latest one."""
    rows = _rows(history)
    t, w = rows.shape[0], spec.w
    if t <= w + 1:
        return SimilaritySet()
    m = rows.shape[1]
    # candidate window for i = w+1..t covers rows i-w-1 .. i-2 (0-based)
    windows = sliding_window_view(rows[:t - 1], (w, m)).reshape(t - w, w * m)
    latest = rows[t - w:].reshape(-1)
    cand = np.arange(w + 1, t + 1)

    if spec.method == "histogram":
        keys = histogram_keys(rows, spec.bins)
        kwin = sliding_window_view(keys[:t - 1], (w, m)).reshape(t - w, w * m)
        mask = np.all(kwin == keys[t - w:].reshape(-1), axis=1)
    elif spec.method == "kernel":
        mask = np.linalg.norm(windows - latest, axis=1) <= spec.radius
    elif spec.method == "nearest_neighbor":
        d = np.linalg.norm(windows - latest, axis=1)
        order = np.lexsort((cand, d))[:spec.neighbors]
        mask = np.zeros(len(cand), dtype=bool)
        mask[order] = True
    else:
        mask = _pearson(windows, latest) >= spec.rho
    return SimilaritySet(tuple(cand[mask]))


def semi_log(z):
    """Second-order expansion of log around 1: z - 1 - (z - 1)^2 / 2."""
    z = np.asarray(z, dtype=float)
    return z - 1.0 - 0.5 * (z - 1.0) ** 2


def gv_rebalance(X, P, b_hat, costs: CostSpec, tol: float = 1e-12, max_iter: int = 500) -> np.ndarray:
    """Maximize sum_i P_i log(b.x_i) + log c(b_hat -> b) over the simplex.

    With z = c b the objective is sum_i P_i log(z.x_i). Writing z = b_hat - s + p
    with sells 0 <= s <= b_hat and buys p >= 0, the cost equation becomes the
    linear budget (1 + gamma_b) sum p = (1 - gamma_s) sum s, so the problem is
    a smooth concave program over a polytope.
    """
    X = np.asarray(X, dtype=float)
    b_hat = np.asarray(b_hat, dtype=float)
    m = b_hat.size

    def split(v):
        return b_hat - v[:m] + v[m:]

    def neg(v):
        return -float(P @ np.log(np.maximum(X @ split(v), 1e-300)))

    def neg_grad(v):
        g = (P / np.maximum(X @ split(v), 1e-300)) @ X
        return np.concatenate([g, -g])

    budget = np.concatenate([np.full(m, -(1.0 - costs.gamma_s)), np.full(m, 1.0 + costs.gamma_b)])
    res = minimize(neg, np.zeros(2 * m), jac=neg_grad, method="SLSQP",
                   bounds=[(0.0, h) for h in b_hat] + [(0.0, None)] * m,
                   constraints=[{"type": "eq", "fun": lambda v: budget @ v, "jac": lambda v: budget}],
                   options={"ftol": tol, "maxiter": max_iter})
    if not np.all(np.isfinite(res.x)):
        raise ConvergenceError("transaction-cost utility did not converge", b_hat.copy())
    z = np.clip(split(res.x), 0.0, None)
    return z / z.sum()


def optimize_utility(C: SimilaritySet, history, u: UtilitySpec = UtilitySpec(), b_prev=None,
                     tol: float = 1e-10, max_iter: int = 10_000) -> np.ndarray:
    """Maximize sum_{i in C} P_i u(b, x_i) over the simplex; uniform when C is empty.

    For the GV utility the transaction-cost term prices the move from the
    drifted previous portfolio (b_prev after the latest observed relative) to b.
    """
    rows = _rows(history)
    m = rows.shape[1]
    if len(C) == 0:
        return uniform(m)
    X = rows[np.asarray(C.indices) - 1]
    P = C.probabilities
    if u.kind == "log_optimal":
        return log_optimal(ScenarioSet(X, P), tol=tol, max_iter=max_iter)

    if u.kind == "semi_log":
        def f(b):
            return float(P @ semi_log(X @ b))

        def grad(b):
            return (P * (2.0 - X @ b)) @ X
    elif u.kind == "markowitz":
        mean_x = P @ X

        def f(b):
            r = X @ b
            e = P @ r
            return float(e - u.lam * (P @ (r * r) - e * e))

        def grad(b):
            r = X @ b
            return mean_x - u.lam * (2.0 * (P * r) @ X - 2.0 * (P @ r) * mean_x)
    else:
        prev = uniform(m) if b_prev is None else np.asarray(b_prev, dtype=float)
        b_hat = drifted(prev, rows[-1])
        return clean(gv_rebalance(X, P, b_hat, CostSpec(u.gamma_b, u.gamma_s)))
    b, _ = maximize_on_simplex(f, grad, uniform(m), tol=tol, max_iter=max_iter)
    return clean(b)


def pm_strategy_decide(history, selector: SelectorSpec, utility: UtilitySpec = UtilitySpec(),
                       b_prev=None, m: Optional[int] = None) -> np.ndarray:
    rows = _rows(history)
    if rows.size == 0:
        if m is None and b_prev is None:
            raise ValueError("cannot infer the number of assets from an empty history")
        return uniform(m if m is not None else len(b_prev))
    return optimize_utility(select_samples(rows, selector), rows, utility, b_prev)


class PatternMatching(Strategy):
    """Sample selection followed by utility maximization."""

    category = CATEGORY
    method = "kernel"
    utility = "log_optimal"

    def __init__(self, w=5, **kw):
        self.w = w
        for p in self.PARAMS:
            if p.name != "w":
                setattr(self, p.name, kw.pop(p.name, p.default))
        if kw:
            raise TypeError(f"unexpected parameters {sorted(kw)}")
        sel = {k: getattr(self, k) for k in ("bins", "radius", "neighbors", "rho") if hasattr(self, k)}
        self.selector = SelectorSpec(self.method, w, **sel)
        ut = {k: getattr(self, k) for k in ("lam", "gamma_b", "gamma_s") if hasattr(self, k)}
        self.utility_spec = UtilitySpec(self.utility, **ut)

    def reset(self, market):
        super().reset(market)
        self._b = uniform(self.m)

    def decide(self, history):
        self._b = pm_strategy_decide(history, self.selector, self.utility_spec, self._b, self.m)
        return self._b


_W = Param("w", "int", 5, "window length", lambda v: v >= 1, ">= 1")
_RADIUS = positive("radius", "float", 0.1, "kernel radius (c / l)")


class HistogramLogOptimal(PatternMatching):
    name = "bh"
    method = "histogram"
    PARAMS = (_W, Param("bins", "int", 3, "equal-probability bins per relative", lambda v: v >= 1, ">= 1"))


class KernelLogOptimal(PatternMatching):
    name = "bk"
    PARAMS = (_W, _RADIUS)


class NearestNeighborLogOptimal(PatternMatching):
    name = "bnn"
    method = "nearest_neighbor"
    PARAMS = (_W, Param("neighbors", "int", 10, "neighbor count", lambda v: v >= 1, ">= 1"))


class CORN(PatternMatching):
    name = "corn"
    method = "correlation"
    PARAMS = (_W, Param("rho", "float", 0.1, "correlation threshold", lambda v: -1 < v <= 1, "in (-1, 1]"))


class KernelSemiLog(PatternMatching):
    name = "bs"
    utility = "semi_log"
    PARAMS = (_W, _RADIUS)


class KernelMarkowitz(PatternMatching):
    name = "bm"
    utility = "markowitz"
    PARAMS = (_W, _RADIUS, Param("lam", "float", 0.5, "variance penalty", lambda v: v >= 0, ">= 0"))


class KernelGV(PatternMatching):
    name = "bgv"
    utility = "gv"
    PARAMS = (_W, _RADIUS,
              Param("gamma_b", "float", 0.001, "buy cost rate", lambda v: 0 <= v < 1, "in [0, 1)"),
              Param("gamma_s", "float", 0.001, "sell cost rate", lambda v: 0 <= v < 1, "in [0, 1)"))


def pm_expert_family(cls, grid: Dict[str, Sequence], **fixed) -> List[PatternMatching]:
    """One strategy of class ``cls`` per value of the single parameter in ``grid``.

    >>> len(pm_expert_family(KernelLogOptimal, {"w": range(1, 6)}))
    5
    """
    if len(grid) != 1:
        raise ValueError("grid must name exactly one parameter")
    (key, values), = grid.items()
    values = list(values)
    if not values:
        raise ValueError(f"empty grid for {key}")
    return [cls(**{**fixed, key: v}) for v in values]
