"""Sequential backtest loop with proportional transaction costs.

Each period t the strategy sees x_1..x_{t-1} and returns b_t; the market then
reveals x_t and wealth moves as S_t = S_{t-1} * c_{t-1} * (b_t . x_t), where
c_{t-1} is the fraction of wealth surviving the rebalance from the drifted
holdings of period t-1 into b_t.  Moving from cash into b_1 is free.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .market import PriceRelativeSequence
from .simplex import WEIGHT_FLOOR, uniform

log = logging.getLogger(__name__)

REPORT_SCHEMA = 1


class ContractViolation(RuntimeError):
    """A strategy produced a portfolio outside the simplex."""

    def __init__(self, message: str, period: int):
        super().__init__(f"period {period}: {message}")
        self.period = period


class Strategy:
    """Base class for online portfolio strategies.

    ``reset`` receives the market before the first period; online strategies
    may only use its shape.  ``decide`` receives the read-only history
    x_1..x_{t-1} as an array of shape (t-1, m) and returns b_t.  Strategies
    flagged ``hindsight`` read the whole market and are exempt from the
    causality check.
    """

    name = "strategy"
    category = ""
    hindsight = False
    PARAMS: tuple = ()

    m: int = 0

    def reset(self, market: PriceRelativeSequence) -> None:
        self.m = market.m

    def decide(self, history: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    @property
    def params(self) -> dict:
        return {p.name: getattr(self, p.name) for p in self.PARAMS}

    def report_extras(self) -> dict:
        return {}

    def __repr__(self):
        args = ", ".join(f"{k}={v!r}" for k, v in self.params.items())
        return f"{type(self).__name__}({args})"


class Uniform(Strategy):
    """Always the uniform portfolio."""

    name = "uniform"

    def decide(self, history):
        return uniform(self.m)


@dataclass(frozen=True)
class CostSpec:
    gamma_b: float = 0.0
    gamma_s: float = 0.0

    def __post_init__(self):
        for label, g in (("buy", self.gamma_b), ("sell", self.gamma_s)):
            if not 0.0 <= g < 1.0:
                raise ValueError(f"{label} cost rate must be in [0, 1), got {g}")

    @property
    def free(self) -> bool:
        return self.gamma_b == 0.0 and self.gamma_s == 0.0


def drifted(b, x) -> np.ndarray:
    """Holdings after one period without rebalancing: (b * x) / (b . x)."""
    b = np.asarray(b, dtype=float)
    w = b * np.asarray(x, dtype=float)
    return w / w.sum()


def cost_residual(c: float, b_hat, b_new, costs: CostSpec) -> float:
    sell = np.maximum(b_hat - b_new * c, 0.0).sum()
    buy = np.maximum(b_new * c - b_hat, 0.0).sum()
    return c + costs.gamma_s * sell + costs.gamma_b * buy - 1.0


def cost_factor(b_prev, x_prev, b_new, costs: CostSpec, tol: float = 1e-12) -> float:
    """Net-wealth fraction c solving 1 = c + g_s sum(b_hat - b c)^+ + g_b sum(b c - b_hat)^+.

    The residual is strictly increasing in c, and the root lies in
    [(1 - g_s) / (1 + g_b), 1], so plain bisection suffices.
    """
    if costs.free:
        return 1.0
    b_hat = drifted(b_prev, x_prev)
    b_new = np.asarray(b_new, dtype=float)
    if np.array_equal(b_hat, b_new):
        return 1.0
    lo = (1.0 - costs.gamma_s) / (1.0 + costs.gamma_b)
    hi = 1.0
    if cost_residual(lo, b_hat, b_new, costs) > tol:
        raise RuntimeError("cost residual positive at the lower bound; inputs are not on the simplex")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if cost_residual(mid, b_hat, b_new, costs) > 0.0:
            hi = mid
        else:
            lo = mid
        if hi - lo <= tol * 1e-3:
            break
    return 0.5 * (lo + hi)


@dataclass
class BacktestResult:
    strategy: str
    params: dict
    portfolios: np.ndarray          # b_1..b_n, shape (n, m)
    period_returns: np.ndarray      # b_t . x_t
    cost_factors: np.ndarray        # c_{t-1}, with c_0 = 1
    wealth: np.ndarray              # S_0..S_n
    next_portfolio: np.ndarray      # b_{n+1}
    costs: CostSpec = field(default_factory=CostSpec)
    extras: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.portfolios.shape[0]

    @property
    def m(self) -> int:
        return self.portfolios.shape[1]

    @property
    def final_wealth(self) -> float:
        return float(self.wealth[-1])

    @property
    def growth_rate(self) -> float:
        return float(np.log(self.final_wealth) / self.n)


def _checked(b, period: int, m: int) -> np.ndarray:
    b = np.asarray(b, dtype=float)
    if b.shape != (m,):
        raise ContractViolation(f"portfolio has shape {b.shape}, expected ({m},)", period)
    if not np.all(np.isfinite(b)):
        raise ContractViolation(f"portfolio has non-finite weights {b}", period)
    if np.any(b < -WEIGHT_FLOOR) or abs(b.sum() - 1.0) > 1e-9:
        raise ContractViolation(f"portfolio {b} is not on the simplex", period)
    return np.maximum(b, 0.0)


def run_backtest(strategy: Strategy, seq: PriceRelativeSequence,
                 costs: Optional[CostSpec] = None) -> BacktestResult:
    costs = costs or CostSpec()
    rel = seq.relatives
    n, m = rel.shape
    strategy.reset(seq)

    portfolios = np.empty((n, m))
    returns = np.empty(n)
    factors = np.ones(n)
    wealth = np.empty(n + 1)
    wealth[0] = 1.0
    for t in range(n):
        b = _checked(strategy.decide(rel[:t]), t + 1, m)
        if t > 0:
            factors[t] = cost_factor(portfolios[t - 1], rel[t - 1], b, costs)
        portfolios[t] = b
        returns[t] = b @ rel[t]
        wealth[t + 1] = wealth[t] * factors[t] * returns[t]
    nxt = _checked(strategy.decide(rel), n + 1, m)
    return BacktestResult(strategy.name, dict(strategy.params), portfolios, returns, factors,
                          wealth, nxt, costs, strategy.report_extras())


def decisions(strategy: Strategy, seq: PriceRelativeSequence) -> np.ndarray:
    """b_1..b_{n+1} for ``seq`` under zero costs."""
    res = run_backtest(strategy, seq)
    return np.vstack([res.portfolios, res.next_portfolio])


def truncation_causality_check(strategy: Strategy, seq: PriceRelativeSequence, t_cut: int) -> bool:
    """True when b_1..b_{t_cut} are unchanged after dropping x_{t_cut}, ..., x_n.

    Hindsight strategies are exempt and always pass.
    """
    if strategy.hindsight:
        log.info("%s is a hindsight benchmark; causality check skipped", strategy.name)
        return True
    if not 2 <= t_cut <= seq.n:
        raise ValueError(f"t_cut must be in [2, {seq.n}], got {t_cut}")
    full = decisions(strategy, seq)[:t_cut]
    try:
        cut = decisions(strategy, seq.head(t_cut - 1))
    except Exception as exc:  # a leaking strategy may index past the truncated market
        log.info("%s failed on truncated market: %s", strategy.name, exc)
        return False
    return bool(np.array_equal(full, cut))


def summarize(result: BacktestResult, bcrp_wealth: Optional[float] = None) -> dict:
    """Report record: final wealth, growth rate, regret against BCRP, cost totals."""
    ratios = result.wealth[1:] / result.wealth[:-1]
    report = {
        "schema": REPORT_SCHEMA,
        "strategy": result.strategy,
        "params": {k: list(v) if isinstance(v, tuple) else v for k, v in result.params.items()},
        "n": result.n,
        "m": result.m,
        "final_wealth": result.final_wealth,
        "growth_rate": result.growth_rate,
        "regret": None,
        "bcrp_wealth": bcrp_wealth,
        "gamma_b": result.costs.gamma_b,
        "gamma_s": result.costs.gamma_s,
        "cost_fraction": float(1.0 - np.prod(result.cost_factors)),
        "cost_sum": float(np.sum(1.0 - result.cost_factors)),
        "max_period_loss": float(max(0.0, np.max(1.0 - ratios))),
        "next_portfolio": [float(v) for v in result.next_portfolio],
    }
    if bcrp_wealth is not None:
        report["regret"] = math.log(bcrp_wealth) - math.log(result.final_wealth)
    if result.extras:
        report["extras"] = result.extras
    return report


def report_json(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=2)


def write_wealth_csv(result: BacktestResult, path, asset_names=None) -> None:
    names = list(asset_names) if asset_names else [f"b{i + 1}" for i in range(result.m)]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["period", "wealth", "period_return", "cost_factor"] + names)
        writer.writerow([0, repr(1.0), "", ""] + [""] * result.m)
        for t in range(result.n):
            writer.writerow([t + 1, repr(float(result.wealth[t + 1])), repr(float(result.period_returns[t])),
                             repr(float(result.cost_factors[t]))] + [repr(float(v)) for v in result.portfolios[t]])
