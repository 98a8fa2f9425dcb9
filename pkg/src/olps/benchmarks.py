"""Baselines: buy-and-hold, best stock, constant rebalanced portfolios and BCRP."""

from __future__ import annotations

import math

import numpy as np

from .engine import Strategy, drifted
from .market import PriceRelativeSequence
from .params import Param
from .simplex import ScenarioSet, is_feasible, log_optimal, uniform

CATEGORY = "Benchmarks"


def _portfolio_param(name="b", help="initial/target portfolio, colon separated (default uniform)"):
    return Param(name, "floats", None, help,
                 lambda v: v is None or is_feasible(np.asarray(v)), "weights >= 0 summing to 1")


def _resolve(b, m):
    if b is None:
        return uniform(m)
    b = np.asarray(b, dtype=float)
    if b.size != m:
        raise ValueError(f"portfolio has {b.size} weights for {m} assets")
    return b


def bah_decide(b, x_prev) -> np.ndarray:
    """Buy-and-hold never trades: the next portfolio is the drifted holding."""
    return drifted(b, x_prev)


def best_stock(seq: PriceRelativeSequence) -> np.ndarray:
    """Vertex on the asset with the largest cumulative return; ties go to the lowest index."""
    logs = np.log(seq.relatives).sum(axis=0)
    top = np.max(logs)
    i = int(np.nonzero(logs >= top - 1e-12 * max(1.0, abs(top)))[0][0])
    b = np.zeros(seq.m)
    b[i] = 1.0
    return b


def bcrp(seq: PriceRelativeSequence, tol: float = 1e-10, max_iter: int = 10_000) -> np.ndarray:
    """Best constant rebalanced portfolio in hindsight."""
    return log_optimal(ScenarioSet.uniform(seq.relatives), tol=tol, max_iter=max_iter)


def regret(alg_wealth: float, bcrp_wealth: float) -> float:
    """log S_n(BCRP) - log S_n(alg); negative when the algorithm beats BCRP."""
    if not alg_wealth > 0 or not bcrp_wealth > 0:
        raise ValueError("wealth must be > 0")
    return math.log(bcrp_wealth) - math.log(alg_wealth)


class BuyAndHold(Strategy):
    name = "bah"
    category = CATEGORY
    PARAMS = (_portfolio_param(),)

    def __init__(self, b=None):
        self.b = b

    def reset(self, market):
        super().reset(market)
        self._b = _resolve(self.b, self.m)

    def decide(self, history):
        if len(history):
            self._b = bah_decide(self._b, history[-1])
        return self._b


class CRP(Strategy):
    name = "crp"
    category = CATEGORY
    PARAMS = (_portfolio_param(),)

    def __init__(self, b=None):
        self.b = b

    def reset(self, market):
        super().reset(market)
        self._b = _resolve(self.b, self.m)

    def decide(self, history):
        return self._b


class UCRP(CRP):
    name = "ucrp"
    PARAMS = ()

    def __init__(self):
        super().__init__(None)


class BestStock(Strategy):
    """Hindsight: holds the eventual best asset from period 1."""

    name = "best"
    category = CATEGORY
    hindsight = True

    def reset(self, market):
        super().reset(market)
        self._b = best_stock(market)

    def decide(self, history):
        return self._b


class BCRP(Strategy):
    """Hindsight: rebalances to the best constant portfolio of the whole market."""

    name = "bcrp"
    category = CATEGORY
    hindsight = True

    def reset(self, market):
        super().reset(market)
        self._b = bcrp(market)

    def decide(self, history):
        return self._b
