"""Reference optima for the Gilbert-Elliot channel.

Wait strategy: the next delay does not depend on the action, so the
embedded chain of delivered delays is the Gilbert-Elliot chain itself and a
stationary policy ``(z0, z1)`` has the renewal-reward average cost

    sum_{s,s'} pi_s P_ss' (f + int_{y_s}^{y_s + z_s + y_s'} p) /
    sum_{s,s'} pi_s P_ss' (z_s + y_s').

Discard strategy: cancellations make the embedded chain attempt-indexed, so
the fixed threshold policy is scored by a long simulation of the attempt
chain.  For any threshold strictly between ``y0`` and ``y1`` the set of
delivered attempts is the same (exactly the good-state attempts), so one
sample path serves every candidate threshold (common random numbers).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .cost import PenaltyFunction, penalty_integral_array


def _check_chain(p, q, y0, y1):
    if not (0.0 <= p <= 1.0 and 0.0 <= q <= 1.0):
        raise ValueError(f"p and q must lie in [0, 1], got p={p}, q={q}")
    if not 0.0 <= y0 <= y1:
        raise ValueError(f"need 0 <= y0 <= y1, got y0={y0}, y1={y1}")


@dataclass(frozen=True)
class GeWaitProblem:
    p: float
    q: float
    y0: float
    y1: float
    f: float = 1.0
    z_max: float = 2.0
    penalty: PenaltyFunction = field(default_factory=PenaltyFunction)
    start_state: int = 0

    def __post_init__(self):
        _check_chain(self.p, self.q, self.y0, self.y1)
        if not self.z_max > 0:
            raise ValueError(f"z_max must be > 0, got {self.z_max}")
        if self.f < 0:
            raise ValueError(f"f must be >= 0, got {self.f}")

    def weights(self) -> np.ndarray:
        """Stationary probability of each (s, s') transition, shape (2, 2)."""
        p, q = self.p, self.q
        if p + q > 0:
            pi = np.array([q, p]) / (p + q)
        else:
            pi = np.eye(2)[self.start_state]
        P = np.array([[1.0 - p, p], [q, 1.0 - q]])
        return pi[:, None] * P


@dataclass(frozen=True)
class GeDiscardProblem:
    p: float
    q: float
    y0: float
    y1: float
    f: float = 4.0
    x_min: float = 0.0
    x_max: float = math.inf
    penalty: PenaltyFunction = field(default_factory=PenaltyFunction)

    def __post_init__(self):
        _check_chain(self.p, self.q, self.y0, self.y1)
        if not self.y0 < self.y1:
            raise ValueError(f"discard needs distinct state delays, got y0=y1={self.y0}")
        if not self.x_min < self.x_max:
            raise ValueError(f"need x_min < x_max, got {self.x_min}, {self.x_max}")
        if self.x_min > self.y1:
            raise ValueError(f"x_min={self.x_min} above y1={self.y1}: no threshold cancels "
                             "only bad-state attempts")
        if self.f < 0:
            raise ValueError(f"f must be >= 0, got {self.f}")


def ge_wait_average_cost(prob: GeWaitProblem, z0, z1):
    """Exact long-run average cost of the wait policy ``Z(y0)=z0, Z(y1)=z1``.

    Accepts scalars or broadcastable arrays.
    """
    z0 = np.asarray(z0, dtype=float)
    z1 = np.asarray(z1, dtype=float)
    if np.any(z0 < 0) or np.any(z1 < 0) or np.any(z0 > prob.z_max) or np.any(z1 > prob.z_max):
        raise ValueError(f"wait times must lie in [0, {prob.z_max}]")
    w = prob.weights()
    ys = (prob.y0, prob.y1)
    zs = (z0, z1)
    num = 0.0
    den = 0.0
    for s in range(2):
        for t in range(2):
            if w[s, t] == 0.0:
                continue
            span = zs[s] + ys[t]
            num = num + w[s, t] * (prob.f + penalty_integral_array(prob.penalty, ys[s], ys[s] + span))
            den = den + w[s, t] * span
    out = num / den
    return float(out) if out.ndim == 0 else out


def ge_wait_optimize(prob: GeWaitProblem, tol: float = 1e-6):
    """Grid search over ``[0, z_max]**2`` then compass refinement down to ``tol``.

    Returns ``(z0, z1, beta)``.
    """
    n = 1001
    grid = np.linspace(0.0, prob.z_max, n)
    vals = ge_wait_average_cost(prob, grid[:, None], grid[None, :])
    i, j = np.unravel_index(np.argmin(vals), vals.shape)
    z = [grid[i], grid[j]]
    best = float(vals[i, j])
    h = grid[1] - grid[0]
    while h >= tol:
        improved = False
        for c in range(2):
            for sgn in (1.0, -1.0):
                cand = list(z)
                cand[c] = min(max(cand[c] + sgn * h, 0.0), prob.z_max)
                v = ge_wait_average_cost(prob, cand[0], cand[1])
                if v < best:
                    best, z, improved = v, cand, True
        if not improved:
            h *= 0.5
    return float(z[0]), float(z[1]), float(best)


def ge_attempt_states(p: float, q: float, n: int, seed: int = 0) -> np.ndarray:
    """Sample path of ``n`` attempt states of the Gilbert-Elliot chain.

    Built from alternating geometric sojourns; the first state is drawn from
    the stationary law.
    """
    rng = np.random.default_rng(seed)
    pi1 = p / (p + q) if p + q > 0 else 0.0
    state = 1 if rng.random() < pi1 else 0
    if (state == 0 and p == 0.0) or (state == 1 and q == 0.0):
        return np.full(n, state, dtype=np.int8)
    out = np.empty(n, dtype=np.int8)
    filled = 0
    while filled < n:
        m = max(1024, int(2 * (n - filled) * min(p, q)) + 16)
        s0 = rng.geometric(p, size=m) if p > 0 else np.full(m, n)
        s1 = rng.geometric(q, size=m) if q > 0 else np.full(m, n)
        lens = np.empty(2 * m, dtype=np.int64)
        states = np.empty(2 * m, dtype=np.int8)
        if state == 0:
            lens[0::2], lens[1::2] = s0, s1
            states[0::2], states[1::2] = 0, 1
        else:
            lens[0::2], lens[1::2] = s1, s0
            states[0::2], states[1::2] = 1, 0
        cum = np.cumsum(lens)
        cut = int(np.searchsorted(cum, n - filled)) + 1
        seg = np.repeat(states[:cut], lens[:cut])[: n - filled]
        out[filled:filled + seg.size] = seg
        filled += seg.size
        state = int(states[cut % (2 * m)]) if cut < 2 * m else int(states[0])
    return out


@dataclass
class DeliveryPattern:
    """Delivery groups of a sample path under one delivered-state mask.

    Each row ``(k, y_prev, y_next, count)`` says ``count`` deliveries needed
    ``k`` attempts, started from state delay ``y_prev`` and delivered
    ``y_next``.
    """

    k: np.ndarray
    y_prev: np.ndarray
    y_next: np.ndarray
    count: np.ndarray

    @classmethod
    def from_states(cls, states: np.ndarray, delivered: tuple[bool, bool], y0: float, y1: float):
        mask = np.where(states == 0, delivered[0], delivered[1])
        idx = np.flatnonzero(mask)
        if idx.size < 2:
            raise ValueError("sample path too short: fewer than two deliveries")
        s = states[idx].astype(np.int64)
        key = np.diff(idx).astype(np.int64) * 4 + s[:-1] * 2 + s[1:]
        uniq, counts = np.unique(key, return_counts=True)
        yv = np.array([y0, y1])
        return cls((uniq // 4).astype(float), yv[(uniq // 2) % 2], yv[uniq % 2],
                   counts.astype(float))

    def average_cost(self, x, f: float, penalty: PenaltyFunction):
        """Time-average cost of threshold ``x`` (scalar or 1-D array) on this path."""
        x = np.atleast_1d(np.asarray(x, dtype=float))[:, None]
        w = (self.k - 1.0) * x + self.y_next
        c = self.k * f + penalty_integral_array(penalty, self.y_prev, self.y_prev + w)
        out = (c * self.count).sum(axis=1) / (w * self.count).sum(axis=1)
        return out if out.size > 1 else float(out[0])


def ge_discard_optimize(prob: GeDiscardProblem, attempts: int = 10_000_000, seed: int = 12345,
                        resolution: float = 1e-3, tol: float = 1e-7):
    """Best fixed threshold ``X(y0) = X(y1) = X`` for the discard strategy.

    Candidates cover ``(y0, y1)`` intersected with ``[x_min, x_max]`` on a grid
    of step ``resolution*(y1 - y0)``; the best grid point is refined by golden
    section on the same sample path.  The no-cancellation policy
    (``X = x_max >= y1``) is also scored when allowed.  Returns ``(x0, beta)``.
    """
    states = ge_attempt_states(prob.p, prob.q, attempts, seed)
    lo = max(prob.y0, prob.x_min)
    hi = min(prob.y1, prob.x_max)
    best_x, best = math.nan, math.inf
    if prob.x_max >= prob.y1:
        keep_all = DeliveryPattern.from_states(states, (True, True), prob.y0, prob.y1)
        # no attempt is ever cancelled, so any threshold >= y1 scores the same
        best_x = prob.x_max if math.isfinite(prob.x_max) else prob.y1
        best = keep_all.average_cost(prob.y1, prob.f, prob.penalty)
    if hi > lo:
        pat = DeliveryPattern.from_states(states, (True, False), prob.y0, prob.y1)
        h = resolution * (prob.y1 - prob.y0)
        grid = np.arange(lo + h, hi, h) if lo == prob.y0 else np.arange(lo, hi, h)
        if prob.x_min > prob.y0 and grid.size and grid[0] != prob.x_min:
            grid = np.r_[prob.x_min, grid]
        grid = grid[(grid > prob.y0) & (grid < prob.y1)]
        if grid.size:
            vals = pat.average_cost(grid, prob.f, prob.penalty)
            vals = np.atleast_1d(vals)
            i = int(np.argmin(vals))
            xg, vg = float(grid[i]), float(vals[i])
            if 0 < i < grid.size - 1:
                func = lambda x: pat.average_cost(x, prob.f, prob.penalty)
                res = optimize.minimize_scalar(func, bracket=(grid[i - 1], xg, grid[i + 1]),
                                               method="golden", tol=tol)
                if res.fun < vg and grid[i - 1] <= res.x <= grid[i + 1]:
                    xg, vg = float(res.x), float(res.fun)
            if vg < best:
                best_x, best = xg, vg
    return float(best_x), float(best)


def ge_discard_average_cost(prob: GeDiscardProblem, x: float, attempts: int = 10_000_000,
                            seed: int = 12345) -> float:
    """Simulated average cost of the fixed threshold ``x`` (``x >= y0``)."""
    if x < prob.y0:
        raise ValueError(f"threshold {x} below y0={prob.y0} never delivers")
    states = ge_attempt_states(prob.p, prob.q, attempts, seed)
    delivered = (True, x >= prob.y1)
    pat = DeliveryPattern.from_states(states, delivered, prob.y0, prob.y1)
    return pat.average_cost(min(x, prob.y1), prob.f, prob.penalty)
