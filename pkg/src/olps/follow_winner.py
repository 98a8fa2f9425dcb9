"""Strategies that move weight toward recent winners or track the BCRP."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import logsumexp

from .engine import Strategy
from .params import Param, positive
from .simplex import (ScenarioSet, clean, is_feasible, log_optimal, maximize_on_simplex,
                      project_to_simplex, quadratic_projection, simplex_grid, uniform,
                      WEIGHT_FLOOR)

CATEGORY = "Follow-the-Winner"


def _rows(history) -> np.ndarray:
    return np.asarray(getattr(history, "relatives", history), dtype=float)


# --- universal portfolio ---------------------------------------------------

@dataclass(frozen=True)
class UPSpec:
    """Discretization of the CRP mixture.

    ``mode="auto"`` uses the barycentric grid for m <= 3 and Monte-Carlo
    draws otherwise.  The Dirichlet(1/2) prior is only available by sampling.
    """

    mode: str = "auto"
    grid_step: float = 0.05
    samples: int = 10_000
    seed: int = 0
    prior: str = "uniform"

    def __post_init__(self):
        if self.mode not in ("auto", "grid", "monte_carlo"):
            raise ValueError(f"unknown UP mode {self.mode!r}")
        if self.prior not in ("uniform", "dirichlet_half"):
            raise ValueError(f"unknown UP prior {self.prior!r}")
        if not 0 < self.grid_step <= 1:
            raise ValueError(f"grid_step must be in (0, 1], got {self.grid_step}")
        if self.samples < 1:
            raise ValueError(f"samples must be >= 1, got {self.samples}")
        if self.mode == "grid" and self.prior != "uniform":
            raise ValueError("the Dirichlet(1/2) prior requires monte_carlo mode")

    def resolved_mode(self, m: int) -> str:
        if self.mode != "auto":
            return self.mode
        return "grid" if m <= 3 and self.prior == "uniform" else "monte_carlo"

    def nodes(self, m: int):
        """Portfolios b_k and log prior weights."""
        if self.resolved_mode(m) == "grid":
            B = simplex_grid(m, self.grid_step)
        else:
            alpha = 1.0 if self.prior == "uniform" else 0.5
            B = np.random.default_rng(self.seed).dirichlet(np.full(m, alpha), size=self.samples)
        return B, np.full(B.shape[0], -np.log(B.shape[0]))


def _node_log_wealth(B, rows) -> np.ndarray:
    if rows.shape[0] == 0:
        return np.zeros(B.shape[0])
    return np.log(np.maximum(rows @ B.T, 1e-300)).sum(axis=0)


def up_decide(history, spec: UPSpec = UPSpec(), m: Optional[int] = None) -> np.ndarray:
    """Wealth-weighted average of the CRP nodes after ``history``."""
    rows = _rows(history)
    m = rows.shape[1] if rows.size else m
    if m is None:
        raise ValueError("cannot infer the number of assets from an empty history")
    if rows.shape[0] == 0:
        return uniform(m)
    B, logw = spec.nodes(m)
    z = logw + _node_log_wealth(B, rows)
    w = np.exp(z - logsumexp(z))
    return clean(w @ B)


def up_wealth_identity(history, spec: UPSpec = UPSpec()) -> float:
    """Prior-weighted mean of the node CRP wealths."""
    rows = _rows(history)
    B, logw = spec.nodes(rows.shape[1])
    return float(np.exp(logsumexp(logw + _node_log_wealth(B, rows))))


class UniversalPortfolio(Strategy):
    name = "up"
    category = CATEGORY
    PARAMS = (
        Param("mode", "str", "auto", "grid, monte_carlo or auto (grid when m <= 3)",
              choices=("auto", "grid", "monte_carlo")),
        Param("grid_step", "float", 0.05, "lattice step", lambda v: 0 < v <= 1, "in (0, 1]"),
        Param("samples", "int", 10_000, "Monte-Carlo prior draws", lambda v: v >= 1, ">= 1"),
        Param("seed", "int", 0, "Monte-Carlo seed"),
        Param("prior", "str", "uniform", "mixing prior", choices=("uniform", "dirichlet_half")),
    )

    def __init__(self, mode="auto", grid_step=0.05, samples=10_000, seed=0, prior="uniform"):
        self.mode, self.grid_step, self.samples, self.seed, self.prior = mode, grid_step, samples, seed, prior
        self.spec = UPSpec(mode, grid_step, samples, seed, prior)

    def reset(self, market):
        super().reset(market)
        self._B, logw = self.spec.nodes(self.m)
        self._z = logw.copy()
        self._seen = 0

    def decide(self, history):
        # accumulate log-wealth of every node incrementally
        for x in history[self._seen:]:
            self._z += np.log(self._B @ x)
        self._seen = len(history)
        w = np.exp(self._z - logsumexp(self._z))
        return clean(w @ self._B)


# --- exponential gradient family -------------------------------------------

def gradient_family_update(b, x, eta: float, mode: str = "EG") -> np.ndarray:
    """One EG / GP / EM step from b_t after observing x_t."""
    b = np.asarray(b, dtype=float)
    x = np.asarray(x, dtype=float)
    g = x / (b @ x)
    mode = mode.upper()
    if mode == "EG":
        # shift the exponent for stability; the normalization cancels it
        w = b * np.exp(eta * (g - g.max()))
        return w / w.sum()
    if mode == "GP":
        nb = b + eta * (g - g.mean())
    elif mode == "EM":
        nb = b * (eta * (g - 1.0) + 1.0)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    if np.any(nb < 0):
        return project_to_simplex(nb)
    return nb / nb.sum()


class ExponentialGradient(Strategy):
    name = "eg"
    category = CATEGORY
    mode = "EG"
    PARAMS = (positive("eta", "float", 0.05, "learning rate"),)

    def __init__(self, eta=0.05):
        self.eta = eta

    def reset(self, market):
        super().reset(market)
        self._b = uniform(self.m)

    def decide(self, history):
        if len(history):
            self._b = gradient_family_update(self._b, history[-1], self.eta, self.mode)
        return self._b


class GradientProjection(ExponentialGradient):
    name = "gp"
    mode = "GP"


class ExpectationMaximization(ExponentialGradient):
    name = "em"
    mode = "EM"


# --- follow the leader -----------------------------------------------------

@dataclass(frozen=True)
class FTLVariant:
    kind: str = "FTL"
    gamma: float = 0.5
    window: int = 20

    def __post_init__(self):
        if self.kind not in ("FTL", "SCRP", "WSCRP", "VRP", "MixedOrdentlich"):
            raise ValueError(f"unknown FTL variant {self.kind!r}")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma must be in [0, 1], got {self.gamma}")
        if self.window < 1:
            raise ValueError(f"window must be >= 1, got {self.window}")


def follow_leader_decide(history, variant: FTLVariant = FTLVariant(), prev=None) -> np.ndarray:
    """Next portfolio of the FTL family after observing ``history`` (t rows)."""
    rows = _rows(history)
    t = rows.shape[0]
    if t == 0:
        if prev is None:
            raise ValueError("empty history needs prev to infer the asset count")
        return uniform(len(prev))
    if variant.kind == "VRP":
        rows = rows[-variant.window:]
    best = log_optimal(ScenarioSet.uniform(rows))
    if variant.kind == "WSCRP":
        prev = uniform(rows.shape[1]) if prev is None else np.asarray(prev, dtype=float)
        return clean((1.0 - variant.gamma) * best + variant.gamma * prev)
    if variant.kind == "MixedOrdentlich":
        return clean(t / (t + 1.0) * best + uniform(rows.shape[1]) / (t + 1.0))
    return best


class FollowTheLeader(Strategy):
    name = "ftl"
    category = CATEGORY
    kind = "FTL"
    PARAMS = ()

    def _variant(self):
        return FTLVariant(self.kind)

    def reset(self, market):
        super().reset(market)
        self._b = uniform(self.m)
        self._v = self._variant()

    def decide(self, history):
        self._b = follow_leader_decide(history, self._v, self._b)
        return self._b


class SCRP(FollowTheLeader):
    name = "scrp"
    kind = "SCRP"


class MixedFTL(FollowTheLeader):
    name = "ftl_mixed"
    kind = "MixedOrdentlich"


class WSCRP(FollowTheLeader):
    name = "wscrp"
    kind = "WSCRP"
    PARAMS = (Param("gamma", "float", 0.5, "weight on the previous portfolio",
                    lambda v: 0 <= v <= 1, "in [0, 1]"),)

    def __init__(self, gamma=0.5):
        self.gamma = gamma

    def _variant(self):
        return FTLVariant("WSCRP", gamma=self.gamma)


class VRP(FollowTheLeader):
    name = "vrp"
    kind = "VRP"
    PARAMS = (Param("window", "int", 20, "sliding window length", lambda v: v >= 1, ">= 1"),)

    def __init__(self, window=20):
        self.window = window

    def _variant(self):
        return FTLVariant("VRP", window=self.window)


# --- online Newton step ------------------------------------------------------

@dataclass
class ONSState:
    A: np.ndarray
    p: np.ndarray
    beta: float = 1.0
    delta: float = 0.125

    @classmethod
    def initial(cls, m: int, beta: float = 1.0, delta: float = 0.125) -> "ONSState":
        return cls(np.eye(m), np.zeros(m), beta, delta)


def ons_update(state: ONSState, b, x):
    """Accumulate curvature and gradient statistics, then project delta A^-1 p under A."""
    b = np.asarray(b, dtype=float)
    x = np.asarray(x, dtype=float)
    r = b @ x
    A = state.A + np.outer(x, x) / r ** 2
    p = state.p + (1.0 + 1.0 / state.beta) * x / r
    new = ONSState(A, p, state.beta, state.delta)
    target = state.delta * np.linalg.solve(A, p)
    return new, quadratic_projection(target, A)


class OnlineNewtonStep(Strategy):
    name = "ons"
    category = CATEGORY
    PARAMS = (positive("beta", "float", 1.0, "trade-off parameter"),
              positive("delta", "float", 0.125, "scale term"))

    def __init__(self, beta=1.0, delta=0.125):
        self.beta, self.delta = beta, delta

    def reset(self, market):
        super().reset(market)
        self._state = ONSState.initial(self.m, self.beta, self.delta)
        self._b = uniform(self.m)

    def decide(self, history):
        if len(history):
            self._state, self._b = ons_update(self._state, self._b, history[-1])
        return self._b


# --- exp-concave FTL ----------------------------------------------------------

def expconcave_ftl_decide(history, m: Optional[int] = None, tol: float = 1e-10,
                          max_iter: int = 10_000) -> np.ndarray:
    """argmax over the simplex of sum_tau log(b . x_tau) - ||b||^2 / 2."""
    rows = _rows(history)
    if rows.size == 0:
        if m is None:
            raise ValueError("cannot infer the number of assets from an empty history")
        return uniform(m)

    def f(b):
        return float(np.log(rows @ np.maximum(b, WEIGHT_FLOOR)).sum() - 0.5 * b @ b)

    def grad(b):
        return (1.0 / (rows @ np.maximum(b, WEIGHT_FLOOR))) @ rows - b

    b, _ = maximize_on_simplex(f, grad, uniform(rows.shape[1]), tol=tol, max_iter=max_iter)
    return clean(b)


class ExpConcaveFTL(Strategy):
    name = "expconcave_ftl"
    category = CATEGORY

    def decide(self, history):
        return expconcave_ftl_decide(history, self.m)


# --- aggregating algorithm over single-stock experts -------------------------

class AggregatingStocks(Strategy):
    """AA whose experts each hold one asset; eta = 1 reproduces uniform buy-and-hold."""

    name = "aa"
    category = CATEGORY
    PARAMS = (positive("eta", "float", 1.0, "learning rate"),)

    def __init__(self, eta=1.0):
        self.eta = eta

    def reset(self, market):
        super().reset(market)
        self._logw = np.zeros(self.m)
        self._seen = 0

    def decide(self, history):
        for x in history[self._seen:]:
            self._logw += self.eta * np.log(x)
        self._seen = len(history)
        return np.exp(self._logw - logsumexp(self._logw))


# --- switching portfolios ----------------------------------------------------

def switching_portfolio_update(b, gamma: float) -> np.ndarray:
    """(1 - gamma - gamma/(m-1)) b + gamma/(m-1), applied to every coordinate."""
    b = np.asarray(b, dtype=float)
    m = b.size
    if m < 2:
        raise ValueError("switching portfolios need at least two assets")
    if not 0.0 <= gamma < 1.0:
        raise ValueError(f"gamma must be in [0, 1), got {gamma}")
    share = gamma / (m - 1)
    return clean((1.0 - gamma - share) * b + share)


class SwitchingPortfolio(Strategy):
    """Applies the fixed-gamma switching update to the decision portfolio.

    Starting from the uniform portfolio this is a fixed point, so the default
    configuration behaves like UCRP; pass ``b`` to start elsewhere.
    """

    name = "sp"
    category = CATEGORY
    PARAMS = (Param("gamma", "float", 0.01, "switching rate", lambda v: 0 <= v < 1, "in [0, 1)"),
              Param("b", "floats", None, "initial portfolio, colon separated (default uniform)",
                    lambda v: v is None or is_feasible(np.asarray(v)), "weights >= 0 summing to 1"))

    def __init__(self, gamma=0.01, b=None):
        self.gamma, self.b = gamma, b

    def reset(self, market):
        super().reset(market)
        if self.m < 2:
            raise ValueError("switching portfolios need at least two assets")
        self._b = uniform(self.m) if self.b is None else np.asarray(self.b, dtype=float)
        if self._b.size != self.m:
            raise ValueError(f"initial portfolio has {self._b.size} weights for {self.m} assets")

    def decide(self, history):
        if len(history):
            self._b = switching_portfolio_update(self._b, self.gamma)
        return self._b
