"""Markov delay processes for per-transmission delays."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .streams import RandomStream


class LognormalMarkovDelay:
    """Lognormal delays driven by a unit-variance AR(1) latent chain.

    The latent state follows ``S' = eta*S + sqrt(1 - eta**2)*N`` and each draw
    emits ``mean_scale * exp(sigma_d*S - sigma_d**2/2)``, whose mean is
    ``mean_scale``.  The latent state starts from one exact N(0, 1) draw.
    """

    kind = "lognormal"

    def __init__(self, stream: RandomStream, sigma_d: float = 1.5, eta: float = 0.0,
                 mean_scale: float = 1.0):
        if not sigma_d > 0:
            raise ValueError(f"sigma_d must be > 0, got {sigma_d}")
        if not 0.0 <= eta <= 1.0:
            raise ValueError(f"eta must lie in [0, 1], got {eta}")
        if not mean_scale > 0:
            raise ValueError(f"mean_scale must be > 0, got {mean_scale}")
        if stream.kind != "normal":
            raise ValueError("lognormal delay needs a normal stream")
        self.stream = stream
        self.sigma_d = float(sigma_d)
        self.eta = float(eta)
        self.mean_scale = float(mean_scale)
        self.innov = math.sqrt(1.0 - self.eta * self.eta)
        self.log_norm = 0.5 * self.sigma_d * self.sigma_d
        self.s = stream.draw()

    def next_delay(self) -> float:
        self.s = self.eta * self.s + self.innov * self.stream.draw()
        return self.mean_scale * math.exp(self.sigma_d * self.s - self.log_norm)

    @property
    def mean(self) -> float:
        return self.mean_scale

    @property
    def max_delay(self) -> float:
        return math.inf


class GilbertElliotDelay:
    """Two-state Markov chain with a fixed delay per state.

    State 0 (good) has delay ``y0`` and state 1 (bad) has delay ``y1``.
    ``p`` is P(0 -> 1) and ``q`` is P(1 -> 0).  Without an explicit ``state``
    the initial state is drawn from the stationary law (``p/(p+q)`` for state
    1); when ``p + q == 0`` it defaults to state 0.
    """

    kind = "gilbert_elliot"

    def __init__(self, stream: RandomStream, p: float, q: float, y0: float, y1: float,
                 state: int | None = None):
        for name, v in (("p", p), ("q", q)):
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if not 0.0 <= y0 <= y1:
            raise ValueError(f"need 0 <= y0 <= y1, got y0={y0}, y1={y1}")
        if stream.kind != "uniform":
            raise ValueError("Gilbert-Elliot delay needs a uniform stream")
        self.stream = stream
        self.p, self.q = float(p), float(q)
        self.y0, self.y1 = float(y0), float(y1)
        if state is None:
            pi1 = self.p / (self.p + self.q) if self.p + self.q > 0 else 0.0
            state = 1 if stream.draw() < pi1 else 0
        if state not in (0, 1):
            raise ValueError(f"state must be 0 or 1, got {state}")
        self.state = int(state)

    def next_delay(self) -> float:
        u = self.stream.draw()
        if self.state == 0:
            if u < self.p:
                self.state = 1
        elif u < self.q:
            self.state = 0
        return self.y1 if self.state else self.y0

    @property
    def stationary_bad(self) -> float:
        return self.p / (self.p + self.q)

    @property
    def mean(self) -> float:
        pi1 = self.stationary_bad
        return (1.0 - pi1) * self.y0 + pi1 * self.y1

    @property
    def max_delay(self) -> float:
        return self.y1


@dataclass
class TwoWayDelayProcess:
    """Forward data delays paired with independent feedback delays."""

    forward: LognormalMarkovDelay | GilbertElliotDelay
    backward: LognormalMarkovDelay | GilbertElliotDelay

    def __post_init__(self):
        if self.forward.stream is self.backward.stream:
            raise ValueError("forward and backward processes must own separate streams")


def eta_from_rho(rho: float) -> float:
    """AR coefficient for a correlation label: ``ln(1 + rho*(e - 1))``."""
    if not 0.0 <= rho <= 1.0:
        raise ValueError(f"rho must lie in [0, 1], got {rho}")
    return math.log1p(rho * (math.e - 1.0))


def rho_label(eta: float) -> float:
    """Correlation label ``(e**eta - 1)/(e - 1)`` used to name channel configs."""
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"eta must lie in [0, 1], got {eta}")
    return math.expm1(eta) / (math.e - 1.0)


def lag1_correlation(sigma_d: float, eta: float) -> float:
    """Exact lag-1 correlation of the emitted lognormal delays."""
    s2 = sigma_d * sigma_d
    return math.expm1(s2 * eta) / math.expm1(s2)
