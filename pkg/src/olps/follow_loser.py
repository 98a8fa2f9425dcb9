"""Mean-reversion strategies that shift wealth from recent winners to losers."""

from __future__ import annotations

from dataclasses import dataclass
from statistics import NormalDist
from typing import Optional

import numpy as np

from .engine import Strategy, drifted
from .params import Param, positive
from .simplex import ConvergenceError, clean, project_to_simplex, uniform

CATEGORY = "Follow-the-Loser"


# --- anticor -----------------------------------------------------------------

def cross_correlation(y1, y2) -> np.ndarray:
    """Lagged cross-correlation M_cor(i, j) between column i of y1 and column j of y2.

    Entries whose standard deviation is zero are defined as 0.
    """
    y1 = np.asarray(y1, dtype=float)
    y2 = np.asarray(y2, dtype=float)
    w = y1.shape[0]
    if w < 2 or y2.shape != y1.shape:
        raise ValueError("need two equal windows of at least 2 rows")
    c1 = y1 - y1.mean(axis=0)
    c2 = y2 - y2.mean(axis=0)
    cov = c1.T @ c2 / (w - 1)
    s1 = y1.std(axis=0, ddof=1)
    s2 = y2.std(axis=0, ddof=1)
    denom = np.outer(s1, s2)
    with np.errstate(divide="ignore", invalid="ignore"):
        cor = np.where(denom > 0, cov / denom, 0.0)
    return cor


def claims_from_correlation(cor, mu2) -> np.ndarray:
    """Transfer claims i -> j for assets i that grew more than j and correlate positively."""
    cor = np.asarray(cor, dtype=float)
    mu2 = np.asarray(mu2, dtype=float)
    auto = np.minimum(np.diag(cor), 0.0)
    claims = cor - auto[:, None] - auto[None, :]
    active = (mu2[:, None] > mu2[None, :]) & (cor > 0)
    np.fill_diagonal(active, False)
    return np.where(active, claims, 0.0)


def anticor_claims(y1, y2) -> np.ndarray:
    return claims_from_correlation(cross_correlation(y1, y2), np.asarray(y2).mean(axis=0))


def anticor_update(b_hat, claims) -> np.ndarray:
    """Move b_hat_i * claim(i->j) / sum_k claim(i->k) from every asset i to j."""
    b_hat = np.asarray(b_hat, dtype=float)
    claims = np.asarray(claims, dtype=float)
    rows = claims.sum(axis=1)
    scale = np.divide(b_hat, rows, out=np.zeros_like(b_hat), where=rows > 0)
    transfer = claims * scale[:, None]
    return clean(b_hat - transfer.sum(axis=1) + transfer.sum(axis=0))


class _AnticorExpert:
    """Anticor with a single window length."""

    def __init__(self, w: int, m: int):
        self.w = w
        self.b = uniform(m)

    def decide(self, history):
        if len(history) == 0:
            return self.b
        b_hat = drifted(self.b, history[-1])
        if len(history) < 2 * self.w:
            self.b = b_hat
        else:
            logs = np.log(history[-2 * self.w:])
            self.b = anticor_update(b_hat, anticor_claims(logs[:self.w], logs[self.w:]))
        return self.b


class Anticor(Strategy):
    """Buy-and-hold combination of Anticor experts with windows w_min..w_max."""

    name = "anticor"
    category = CATEGORY
    PARAMS = (Param("w_min", "int", 2, "smallest window", lambda v: v >= 2, ">= 2"),
              Param("w_max", "int", 30, "largest window", lambda v: v >= 2, ">= 2"))

    def __init__(self, w_min=2, w_max=30):
        if w_max < w_min:
            raise ValueError(f"w_max ({w_max}) < w_min ({w_min})")
        self.w_min, self.w_max = w_min, w_max

    def reset(self, market):
        super().reset(market)
        self._experts = [_AnticorExpert(w, self.m) for w in range(self.w_min, self.w_max + 1)]
        self._wealth = np.ones(len(self._experts))
        self._last = None

    def decide(self, history):
        if len(history) and self._last is not None:
            self._wealth *= self._last @ history[-1]
        self._last = np.array([e.decide(history) for e in self._experts])
        return clean(self._wealth @ self._last / self._wealth.sum())


# --- passive aggressive mean reversion ---------------------------------------

@dataclass(frozen=True)
class ReversionSpec:
    epsilon: float = 0.5
    window: int = 5
    C: Optional[float] = None
    variant: str = "pamr"

    def __post_init__(self):
        if self.epsilon < 0:
            raise ValueError(f"epsilon must be >= 0, got {self.epsilon}")
        if self.window < 1:
            raise ValueError(f"window must be >= 1, got {self.window}")
        if self.variant not in ("pamr", "pamr1", "pamr2"):
            raise ValueError(f"unknown PAMR variant {self.variant!r}")
        if self.variant != "pamr" and not (self.C is not None and self.C > 0):
            raise ValueError(f"{self.variant} needs an aggressiveness C > 0")


def pamr_loss(b, x, eps: float) -> float:
    """epsilon-insensitive loss max(0, b.x - eps)."""
    return max(0.0, float(np.dot(b, x)) - eps)


def pamr_update(b, x, spec: ReversionSpec = ReversionSpec()) -> np.ndarray:
    b = np.asarray(b, dtype=float)
    x = np.asarray(x, dtype=float)
    loss = pamr_loss(b, x, spec.epsilon)
    dev = x - x.mean()
    norm2 = float(dev @ dev)
    if loss == 0.0 or norm2 == 0.0:
        return b
    if spec.variant == "pamr":
        tau = loss / norm2
    elif spec.variant == "pamr1":
        tau = min(spec.C, loss / norm2)
    else:
        tau = loss / (norm2 + 0.5 / spec.C)
    return project_to_simplex(b - tau * dev)


class PAMR(Strategy):
    name = "pamr"
    category = CATEGORY
    PARAMS = (Param("eps", "float", 0.5, "reversion threshold", lambda v: 0 <= v <= 1, "in [0, 1]"),
              Param("variant", "str", "pamr", "update rule", choices=("pamr", "pamr1", "pamr2")),
              positive("C", "float", 500.0, "aggressiveness (pamr1/pamr2 only)"))

    def __init__(self, eps=0.5, variant="pamr", C=500.0):
        self.eps, self.variant, self.C = eps, variant, C
        self.spec = ReversionSpec(eps, C=C, variant=variant)

    def reset(self, market):
        super().reset(market)
        self._b = uniform(self.m)

    def decide(self, history):
        if len(history):
            self._b = pamr_update(self._b, history[-1], self.spec)
        return self._b


# --- confidence weighted mean reversion --------------------------------------

@dataclass(frozen=True)
class GaussianPortfolio:
    mu: np.ndarray
    sigma: np.ndarray   # diagonal of the covariance

    @classmethod
    def initial(cls, m: int) -> "GaussianPortfolio":
        return cls(uniform(m), np.full(m, 1.0 / m ** 2))


def _cwmr_residual(lam, g, x, eps, phi, direction):
    mu = g.mu - lam * direction
    sigma = 1.0 / (1.0 / g.sigma + 2.0 * lam * phi * x * x)
    return eps - mu @ x - phi * (sigma * x * x).sum()


def cwmr_update(g: GaussianPortfolio, x, eps: float = 0.5, phi: float = 2.0,
                lam_max: float = 1e6) -> GaussianPortfolio:
    """Mean moves by -lambda Sigma (x - xbar 1); the precision gains 2 lambda phi x^2.

    lambda is the smallest value making eps - mu.x >= phi x' Sigma x tight,
    found by bisection on [0, lam_max]; when even lam_max leaves the constraint
    violated the step is taken at lam_max.  Only the diagonal of the updated
    covariance is kept.
    """
    x = np.asarray(x, dtype=float)
    if phi < 0:
        raise ValueError(f"phi must be >= 0, got {phi}")
    xbar = (g.sigma @ x) / g.sigma.sum()
    direction = g.sigma * (x - xbar)
    if _cwmr_residual(0.0, g, x, eps, phi, direction) >= 0.0 or not np.any(direction):
        return g
    lo, hi = 0.0, lam_max
    if _cwmr_residual(hi, g, x, eps, phi, direction) < 0.0:
        lam = hi
    else:
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if _cwmr_residual(mid, g, x, eps, phi, direction) < 0.0:
                lo = mid
            else:
                hi = mid
            if hi - lo <= 1e-12 * max(1.0, hi):
                break
        else:
            raise ConvergenceError("CWMR multiplier bisection did not converge", best=hi)
        lam = hi
    mu = project_to_simplex(g.mu - lam * direction)
    sigma = 1.0 / (1.0 / g.sigma + 2.0 * lam * phi * x * x)
    return GaussianPortfolio(mu, sigma)


class CWMR(Strategy):
    name = "cwmr"
    category = CATEGORY
    PARAMS = (Param("eps", "float", 0.5, "reversion threshold", lambda v: 0 <= v <= 1, "in [0, 1]"),
              Param("theta", "float", 0.95, "confidence level", lambda v: 0.5 <= v < 1, "in [0.5, 1)"))

    def __init__(self, eps=0.5, theta=0.95):
        self.eps, self.theta = eps, theta
        self.phi = NormalDist().inv_cdf(theta)

    def reset(self, market):
        super().reset(market)
        self._g = GaussianPortfolio.initial(self.m)

    def decide(self, history):
        if len(history):
            self._g = cwmr_update(self._g, history[-1], self.eps, self.phi)
        return self._g.mu


# --- moving average / median reversion ---------------------------------------

def olmar_predict(window, w: int) -> np.ndarray:
    """Moving-average price over the last w prices divided by the latest price.

    ``window`` holds recent price relatives, latest last.  With fewer than
    w-1 rows the average runs over the prices that are available.
    """
    if w < 1:
        raise ValueError(f"w must be >= 1, got {w}")
    rows = np.atleast_2d(np.asarray(window, dtype=float))
    k = min(w - 1, rows.shape[0])
    recent = rows[rows.shape[0] - k:][::-1]           # x_t, x_{t-1}, ...
    inv = np.vstack([np.ones(rows.shape[1]), 1.0 / np.cumprod(recent, axis=0)])
    return inv.mean(axis=0)


def reversion_pa_step(b, xhat, eps: float) -> np.ndarray:
    """Smallest move (then projected) making b . xhat >= eps."""
    b = np.asarray(b, dtype=float)
    xhat = np.asarray(xhat, dtype=float)
    gap = eps - float(b @ xhat)
    dev = xhat - xhat.mean()
    norm2 = float(dev @ dev)
    if gap <= 0.0 or norm2 == 0.0:
        return b
    return project_to_simplex(b + gap / norm2 * dev)


def l1_median(points, tol: float = 1e-9, max_iter: int = 10_000,
              trace: Optional[list] = None) -> np.ndarray:
    """Geometric median by Weiszfeld iteration from the coordinate-wise mean.

    Each iteration takes the better of the Weiszfeld point and a Newton step,
    so the objective never increases.  Weiszfeld converges only sublinearly when the median is a data point, so
    data points are tested first: p_k is optimal when the unit vectors towards
    the other points sum to a norm no larger than the multiplicity of p_k.
    Distances below 1e-12 are padded by 1e-10 so an iterate landing on a data
    point does not divide by zero.  If ``trace`` is a list, the objective of
    every iterate (starting point included) is appended to it.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    mu = pts.mean(axis=0)

    def objective(c):
        return float(np.linalg.norm(pts - c, axis=1).sum())

    best, best_f = mu, objective(mu)
    if trace is not None:
        trace.append(best_f)

    diff = pts[None, :, :] - pts[:, None, :]
    dist = np.linalg.norm(diff, axis=2)
    same = dist == 0.0
    units = np.divide(diff, dist[:, :, None], out=np.zeros_like(diff), where=~same[:, :, None])
    pull = np.linalg.norm(units.sum(axis=1), axis=1)
    k = int(np.argmin(pull - same.sum(axis=1)))
    if pull[k] <= same[k].sum():
        if trace is not None:
            trace.append(objective(pts[k]))
        return pts[k].copy()
    eye = np.eye(pts.shape[1])
    for _ in range(max_iter):
        d = np.linalg.norm(pts - mu, axis=1)
        d = np.where(d < 1e-12, d + 1e-10, d)
        w = 1.0 / d
        u = (mu - pts) / d[:, None]
        grad = u.sum(axis=0)
        # convexity bound: f(mu) - f* <= |grad| max_j |mu - p_j|, since the median
        # lies in the convex hull of the points
        if float(np.linalg.norm(grad)) * d.max() <= tol * (1.0 + best_f):
            return best
        nxt = w @ pts / w.sum()
        f = objective(nxt)
        # a damped Newton step fixes the slow crawl along nearly flat valleys;
        # it is kept only when it beats the Weiszfeld point
        H = w.sum() * eye - np.einsum("j,ja,jb->ab", w, u, u)
        try:
            delta = np.linalg.solve(H, grad)
        except np.linalg.LinAlgError:
            delta = np.zeros_like(mu)
        t = 1.0
        while t > 1e-6 and np.all(np.isfinite(delta)) and np.any(delta):
            cand = mu - t * delta
            f_cand = objective(cand)
            if f_cand < f:
                nxt, f = cand, f_cand
                break
            t *= 0.5
        step = float(np.linalg.norm(nxt - mu))
        mu = nxt
        if trace is not None:
            trace.append(f)
        if f <= best_f:
            best, best_f = mu, f
        if step < tol:
            return best
    raise ConvergenceError(f"Weiszfeld iteration did not converge in {max_iter} steps", best=best, value=best_f)


def rmr_predict(price_window, w: Optional[int] = None) -> np.ndarray:
    """L1-median of the last w price vectors divided by the latest price."""
    prices = np.atleast_2d(np.asarray(price_window, dtype=float))
    if w is not None:
        if w < 2:
            raise ValueError(f"w must be >= 2, got {w}")
        prices = prices[-w:]
    return l1_median(prices) / prices[-1]


def _recent_prices(history, w: int) -> np.ndarray:
    """Last w prices scaled so the latest equals 1 (oldest first)."""
    rel = history[len(history) - (w - 1):][::-1]
    back = np.vstack([np.ones(history.shape[1]), 1.0 / np.cumprod(rel, axis=0)])
    return back[::-1]


class OLMAR(Strategy):
    name = "olmar"
    category = CATEGORY
    PARAMS = (Param("eps", "float", 10.0, "reversion threshold", lambda v: v >= 1, ">= 1"),
              Param("w", "int", 5, "moving average window", lambda v: v >= 2, ">= 2"))

    def __init__(self, eps=10.0, w=5):
        self.eps, self.w = eps, w

    def reset(self, market):
        super().reset(market)
        self._b = uniform(self.m)

    def _predict(self, history):
        return olmar_predict(history[-(self.w - 1):], self.w)

    def decide(self, history):
        if len(history) < self.w:
            return self._b
        self._b = reversion_pa_step(self._b, self._predict(history), self.eps)
        return self._b


class RMR(OLMAR):
    name = "rmr"
    PARAMS = (Param("eps", "float", 5.0, "reversion threshold", lambda v: v >= 1, ">= 1"),
              Param("w", "int", 5, "median window", lambda v: v >= 2, ">= 2"))

    def __init__(self, eps=5.0, w=5):
        super().__init__(eps, w)

    def _predict(self, history):
        return rmr_predict(_recent_prices(history, self.w))
