"""Numerics on the portfolio simplex.

Euclidean projection, a projected-gradient maximizer for concave objectives,
the weighted log-optimal (Kelly) portfolio and wealth accounting.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

WEIGHT_FLOOR = 1e-12


class ConvergenceError(RuntimeError):
    """A solver ran out of iterations.  ``best`` holds the best iterate found."""

    def __init__(self, message: str, best=None, value: Optional[float] = None):
        super().__init__(message)
        self.best = best
        self.value = value


def uniform(m: int) -> np.ndarray:
    return np.full(m, 1.0 / m)


def project_to_simplex(v) -> np.ndarray:
    """Euclidean projection of ``v`` onto {b >= 0, sum(b) = 1} (sort-based)."""
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or v.size == 0:
        raise ValueError("expected a non-empty vector")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"cannot project non-finite vector {v}")
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    idx = np.arange(1, v.size + 1)
    rho = np.nonzero(u - css / idx > 0)[0][-1]
    theta = css[rho] / (rho + 1.0)
    return np.maximum(v - theta, 0.0)


def is_feasible(b, atol: float = 1e-9) -> bool:
    b = np.asarray(b, dtype=float)
    return bool(b.ndim == 1 and np.all(np.isfinite(b)) and np.all(b >= -WEIGHT_FLOOR)
                and abs(b.sum() - 1.0) <= atol)


def clean(b) -> np.ndarray:
    """Clamp round-off negatives to zero."""
    return np.maximum(np.asarray(b, dtype=float), 0.0)


def maximize_on_simplex(objective: Callable[[np.ndarray], float],
                        gradient: Callable[[np.ndarray], np.ndarray],
                        x0, tol: float = 1e-10, max_iter: int = 10_000):
    """Projected gradient ascent with backtracking for a smooth concave objective.

    The loop stops once the Frank-Wolfe gap ``max_i g_i - g.b`` (an upper
    bound on the distance to the optimum) drops below ``tol``.

    Returns ``(b, value)``.
    """
    b = project_to_simplex(x0)
    f = objective(b)
    g = gradient(b)
    step = 1.0
    for _ in range(max_iter):
        gap = float(np.max(g) - g @ b)
        if gap <= tol:
            return b, f
        # once objective differences drop to rounding error, a gradient-based
        # Lipschitz test replaces the sufficient-increase test
        noise = 8.0 * np.finfo(float).eps * (1.0 + abs(f))
        while True:
            cand = project_to_simplex(b + step * g)
            d = cand - b
            dd = float(d @ d)
            if dd <= 1e-30:
                return b, f
            f_new = objective(cand)
            g_new = gradient(cand)
            if abs(f_new - f) <= noise:
                if np.linalg.norm(g_new - g) <= math.sqrt(dd) / step:
                    break
            elif f_new >= f + float(g @ d) - dd / (2.0 * step):
                break
            step *= 0.5
            if step < 1e-20:
                return b, f
        b, f, g = cand, f_new, g_new
        step *= 2.0
    raise ConvergenceError(f"no convergence after {max_iter} iterations (gap {gap:.3e})", best=b, value=f)


@dataclass(frozen=True)
class ScenarioSet:
    """Predicted price relative vectors with their probabilities."""

    scenarios: np.ndarray
    probabilities: np.ndarray

    def __post_init__(self):
        x = np.atleast_2d(np.asarray(self.scenarios, dtype=float))
        p = np.asarray(self.probabilities, dtype=float)
        if x.shape[0] == 0:
            raise ValueError("empty scenario set")
        if p.shape != (x.shape[0],):
            raise ValueError(f"{p.size} probabilities for {x.shape[0]} scenarios")
        if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
            raise ValueError("probabilities must be non-negative and sum to 1")
        if np.any(x <= 0) or not np.all(np.isfinite(x)):
            raise ValueError("scenario entries must be finite and > 0")
        object.__setattr__(self, "scenarios", x)
        object.__setattr__(self, "probabilities", p)

    @classmethod
    def uniform(cls, scenarios) -> "ScenarioSet":
        x = np.atleast_2d(np.asarray(scenarios, dtype=float))
        return cls(x, np.full(x.shape[0], 1.0 / x.shape[0]))


def expected_log(b, scen: ScenarioSet) -> float:
    r = scen.scenarios @ np.maximum(b, WEIGHT_FLOOR)
    return float(scen.probabilities @ np.log(r))


def _expected_log_grad(b, scen: ScenarioSet) -> np.ndarray:
    r = scen.scenarios @ np.maximum(b, WEIGHT_FLOOR)
    return (scen.probabilities / r) @ scen.scenarios


def log_optimal(scen: ScenarioSet, tol: float = 1e-10, max_iter: int = 10_000) -> np.ndarray:
    """Portfolio maximizing sum_i p_i log(b . x_i) over the simplex.

    Starts from the uniform portfolio; on flat optima the ascent never
    moves along directions orthogonal to every scenario, which keeps the
    result at the optimum nearest uniform.
    """
    x = scen.scenarios
    b, _ = maximize_on_simplex(lambda b: expected_log(b, scen),
                               lambda b: _expected_log_grad(b, scen),
                               uniform(x.shape[1]), tol=tol, max_iter=max_iter)
    return clean(b)


def crp_wealth(b, relatives) -> float:
    """Wealth of rebalancing to ``b`` every period, starting from 1."""
    rel = np.asarray(getattr(relatives, "relatives", relatives), dtype=float)
    b = np.asarray(b, dtype=float)
    if rel.ndim != 2 or rel.shape[1] != b.size:
        raise ValueError(f"portfolio of size {b.size} does not match market shape {rel.shape}")
    return float(np.exp(np.sum(np.log(rel @ b))))


def growth_rate(wealth: float, n: int) -> float:
    """Exponential growth rate (1/n) log S_n."""
    if not wealth > 0:
        raise ValueError(f"wealth must be > 0, got {wealth}")
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    return float(np.log(wealth) / n)


def simplex_grid(m: int, step: float) -> np.ndarray:
    """Barycentric lattice {k/K : sum k = K} with K = round(1/step)."""
    if not 0 < step <= 1:
        raise ValueError(f"grid step must be in (0, 1], got {step}")
    K = max(1, int(round(1.0 / step)))

    def compositions(total: int, parts: int):
        if parts == 1:
            yield (total,)
            return
        for k in range(total, -1, -1):
            for rest in compositions(total - k, parts - 1):
                yield (k,) + rest

    return np.array(list(compositions(K, m)), dtype=float) / K


def quadratic_projection(y, A, tol: float = 1e-10, max_iter: int = 10_000) -> np.ndarray:
    """argmin over the simplex of (q - y)^T A (q - y) for symmetric positive definite A."""
    y = np.asarray(y, dtype=float)
    A = np.asarray(A, dtype=float)
    b, _ = maximize_on_simplex(lambda q: -float((q - y) @ A @ (q - y)),
                               lambda q: -2.0 * (A @ (q - y)),
                               project_to_simplex(y), tol=tol, max_iter=max_iter)
    return clean(b)


def combine(weights: Sequence[float], portfolios) -> np.ndarray:
    """Convex combination sum_j w_j b_j."""
    return clean(np.asarray(weights, dtype=float) @ np.asarray(portfolios, dtype=float))
