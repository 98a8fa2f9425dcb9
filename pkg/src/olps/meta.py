"""Meta-learning layers that allocate wealth across base strategies.

Every combiner follows the same per-period pattern: the combined portfolio is
sum_j w_j b_j under the current expert weights, and once x_t is revealed the
weights are updated from the expert returns r_j = b_j . x_t.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np

from .engine import Strategy
from .follow_winner import ONSState, gradient_family_update, ons_update
from .params import positive
from .simplex import combine

CATEGORY = "Meta-Learning Algorithms"


@dataclass
class ExpertPool:
    weights: np.ndarray
    wealths: np.ndarray
    ons: Optional[ONSState] = field(default=None)

    @classmethod
    def initial(cls, n_experts: int, beta: float = 1.0, delta: float = 0.125) -> "ExpertPool":
        if n_experts < 1:
            raise ValueError("need at least one expert")
        return cls(np.full(n_experts, 1.0 / n_experts), np.ones(n_experts),
                   ONSState.initial(n_experts, beta, delta))


def _returns(expert_portfolios, x) -> np.ndarray:
    return np.asarray(expert_portfolios, dtype=float) @ np.asarray(x, dtype=float)


def aa_update(pool: ExpertPool, expert_portfolios, x, eta: float = 1.0):
    """Aggregating algorithm with loss -log(b_j . x): w_j <- w_j (b_j . x)^eta, renormalized."""
    combined = combine(pool.weights, expert_portfolios)
    r = _returns(expert_portfolios, x)
    logw = np.log(pool.weights) + eta * np.log(r)
    w = np.exp(logw - logw.max())
    return ExpertPool(w / w.sum(), pool.wealths * r, pool.ons), combined


def bah_combine(pool: ExpertPool, expert_portfolios, x):
    """Split wealth evenly, let each expert compound on its own, pool the result."""
    combined = combine(pool.weights, expert_portfolios)
    wealths = pool.wealths * _returns(expert_portfolios, x)
    return ExpertPool(wealths / wealths.sum(), wealths, pool.ons), combined


def ogu_update(pool: ExpertPool, expert_portfolios, x, eta: float = 0.05):
    """EG step on the expert weights, with expert returns as the price relatives."""
    combined = combine(pool.weights, expert_portfolios)
    r = _returns(expert_portfolios, x)
    w = gradient_family_update(pool.weights, r, eta, "EG")
    return ExpertPool(w, pool.wealths * r, pool.ons), combined


def onu_update(pool: ExpertPool, expert_portfolios, x, beta: float = 1.0, delta: float = 0.125):
    """ONS step on the expert weights, with expert returns as the price relatives."""
    combined = combine(pool.weights, expert_portfolios)
    r = _returns(expert_portfolios, x)
    state = pool.ons if pool.ons is not None else ONSState.initial(len(pool.weights), beta, delta)
    state, w = ons_update(state, pool.weights, r)
    return ExpertPool(w, pool.wealths * r, state), combined


class MetaStrategy(Strategy):
    """Base for combiners over a fixed list of experts."""

    category = CATEGORY
    kind = ""

    def __init__(self, experts: Sequence[Strategy]):
        if not experts:
            raise ValueError("a meta strategy needs at least one expert")
        self.experts = list(experts)

    @property
    def params(self):
        out = {"experts": [e.name for e in self.experts]}
        out.update({p.name: getattr(self, p.name) for p in self.PARAMS})
        return out

    def reset(self, market):
        super().reset(market)
        for e in self.experts:
            e.reset(market)
        self.pool = ExpertPool.initial(len(self.experts), getattr(self, "beta", 1.0),
                                       getattr(self, "delta", 0.125))
        self._last = None

    def _update(self, pool, portfolios, x):
        raise NotImplementedError

    def decide(self, history):
        if len(history) and self._last is not None:
            self.pool, _ = self._update(self.pool, self._last, history[-1])
        self._last = np.array([e.decide(history) for e in self.experts])
        return combine(self.pool.weights, self._last)

    def report_extras(self):
        return {"experts": [{"name": e.name, "params": _plain(e.params), "wealth": float(w)}
                            for e, w in zip(self.experts, self.pool.wealths)],
                "expert_weights": [float(w) for w in self.pool.weights]}


def _plain(params):
    return {k: list(v) if isinstance(v, tuple) else v for k, v in params.items()}


class AggregatingAlgorithm(MetaStrategy):
    name = "meta:aa"
    PARAMS = (positive("eta", "float", 1.0, "learning rate"),)

    def __init__(self, experts, eta=1.0):
        super().__init__(experts)
        self.eta = eta

    def _update(self, pool, portfolios, x):
        return aa_update(pool, portfolios, x, self.eta)


class BAHCombination(MetaStrategy):
    name = "meta:bah"
    PARAMS = ()

    def _update(self, pool, portfolios, x):
        return bah_combine(pool, portfolios, x)


class OnlineGradientUpdate(MetaStrategy):
    name = "meta:ogu"
    PARAMS = (positive("eta", "float", 0.05, "learning rate"),)

    def __init__(self, experts, eta=0.05):
        super().__init__(experts)
        self.eta = eta

    def _update(self, pool, portfolios, x):
        return ogu_update(pool, portfolios, x, self.eta)


class OnlineNewtonUpdate(MetaStrategy):
    name = "meta:onu"
    PARAMS = (positive("beta", "float", 1.0, "trade-off parameter"),
              positive("delta", "float", 0.125, "scale term"))

    def __init__(self, experts, beta=1.0, delta=0.125):
        super().__init__(experts)
        self.beta, self.delta = beta, delta

    def _update(self, pool, portfolios, x):
        return onu_update(pool, portfolios, x, self.beta, self.delta)


# --- follow the leading history ---------------------------------------------

def _bucket(age: int) -> int:
    return 0 if age == 0 else age.bit_length()


def ladder_keep(starts: Sequence[int], t: int) -> List[int]:
    """Positions of the experts to keep at period t.

    Ages t - s are grouped into buckets {0}, [1, 2), [2, 4), [4, 8), ... and the
    oldest expert of each bucket survives, so at most ceil(log2 t) + 1 remain.
    """
    chosen = {}
    for pos, s in enumerate(starts):
        b = _bucket(t - s)
        if b not in chosen or s < starts[chosen[b]]:
            chosen[b] = pos
    return sorted(chosen.values())


class FollowLeadingHistory(Strategy):
    """Working set of base experts started at different periods.

    A fresh expert joins every period with weight 1/t, existing weights are
    updated multiplicatively by each expert's return, and the working set is
    thinned to a geometric ladder of start times.
    """

    name = "meta:flh"
    category = CATEGORY
    PARAMS = ()

    def __init__(self, base_factory: Callable[[], Strategy], base_name: Optional[str] = None):
        self.base_factory = base_factory
        self.base_name = base_name or base_factory().name

    @property
    def params(self):
        return {"experts": [self.base_name]}

    def reset(self, market):
        super().reset(market)
        self._market = market
        self.starts: List[int] = []
        self.members: List[Strategy] = []
        self.weights = np.zeros(0)
        self._last = None

    def _spawn(self, start: int) -> Strategy:
        expert = self.base_factory()
        expert.reset(self._market)
        self.starts.append(start)
        self.members.append(expert)
        return expert

    def decide(self, history):
        t = len(history) + 1
        if t == 1 or not self.members:
            self._spawn(t)
            self.weights = np.ones(1)
        else:
            flh_step(self, history[-1], t)
        self._last = np.array([e.decide(history[s - 1:]) for e, s in zip(self.members, self.starts)])
        return combine(self.weights, self._last)

    def report_extras(self):
        return {"working_set": [{"start": s, "weight": float(w)} for s, w in zip(self.starts, self.weights)]}


def flh_step(flh: FollowLeadingHistory, x, t: int) -> None:
    """Reweight by the returns on x_{t-1}, add an expert starting at t, prune to the ladder."""
    r = flh._last @ np.asarray(x, dtype=float)
    w = flh.weights * r
    w = w / w.sum()
    alpha = 1.0 / t
    flh._spawn(t)
    w = np.append(w * (1.0 - alpha), alpha)
    keep = ladder_keep(flh.starts, t)
    flh.starts = [flh.starts[i] for i in keep]
    flh.members = [flh.members[i] for i in keep]
    w = w[keep]
    flh.weights = w / w.sum()
