"""Delivery costs: transmission cost plus the AoI cost of the interval."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Integer codes shared with the compiled kernel.
IDENTITY, POWER, EXPONENTIAL, STEP, SCALED_EXP = range(5)
PENALTY_KINDS = {
    "identity": IDENTITY,
    "power": POWER,
    "exponential": EXPONENTIAL,
    "step": STEP,
    "scaled_exp": SCALED_EXP,
}


@dataclass(frozen=True)
class PenaltyFunction:
    """Non-decreasing AoI penalty p(t).

    identity: t; power: t**gamma; exponential: exp(gamma*t);
    step: floor(gamma*t); scaled_exp: eta*(exp(gamma*t) - 1).
    Note that ``exponential`` has p(0) = 1, every other variant has p(0) = 0.
    """

    kind: str = "identity"
    gamma: float = 1.0
    eta: float = 1.0

    def __post_init__(self):
        if self.kind not in PENALTY_KINDS:
            raise ValueError(f"unknown penalty kind {self.kind!r}")
        if not self.gamma > 0:
            raise ValueError(f"penalty gamma must be > 0, got {self.gamma}")
        if not self.eta > 0:
            raise ValueError(f"penalty eta must be > 0, got {self.eta}")

    @property
    def code(self) -> int:
        return PENALTY_KINDS[self.kind]

    def __call__(self, t: float) -> float:
        code = self.code
        if code == IDENTITY:
            return t
        if code == POWER:
            return t ** self.gamma
        if code == EXPONENTIAL:
            return math.exp(self.gamma * t)
        if code == STEP:
            return float(math.floor(self.gamma * t))
        return self.eta * math.expm1(self.gamma * t)


def _step_antiderivative(gamma: float, x: float) -> float:
    # integral of floor(gamma*t) over [0, x]
    m = math.floor(gamma * x)
    return m * (m - 1) / (2.0 * gamma) + m * (x - m / gamma)


def penalty_integral(p: PenaltyFunction, a: float, b: float) -> float:
    """Exact integral of ``p`` over ``[a, b]``."""
    if a > b:
        raise ValueError(f"penalty_integral needs a <= b, got a={a}, b={b}")
    if a < 0:
        raise ValueError(f"penalty_integral needs a >= 0, got a={a}")
    return _integral(p.code, p.gamma, p.eta, a, b)


def _integral(code: int, gamma: float, eta: float, a: float, b: float) -> float:
    # overflow saturates to inf, matching IEEE arithmetic in the compiled kernel
    try:
        return _integral_raw(code, gamma, eta, a, b)
    except OverflowError:
        return math.inf


def _integral_raw(code: int, gamma: float, eta: float, a: float, b: float) -> float:
    if code == IDENTITY:
        return 0.5 * (b - a) * (b + a)
    if code == POWER:
        g1 = gamma + 1.0
        return (b ** g1 - a ** g1) / g1
    if code == EXPONENTIAL:
        return math.exp(gamma * a) * math.expm1(gamma * (b - a)) / gamma
    if code == STEP:
        return _step_antiderivative(gamma, b) - _step_antiderivative(gamma, a)
    return eta * (math.exp(gamma * a) * math.expm1(gamma * (b - a)) / gamma - (b - a))


@dataclass(frozen=True)
class DeliveryRecord:
    y_prev: float
    elapsed: float
    k: int = 1

    def __post_init__(self):
        if self.y_prev < 0:
            raise ValueError(f"y_prev must be >= 0, got {self.y_prev}")
        if self.elapsed < 0:
            raise ValueError(f"elapsed must be >= 0, got {self.elapsed}")
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")


@dataclass(frozen=True)
class CostModel:
    """Penalty-integral or peak-violation AoI cost plus ``f`` per transmission.

    ``kind`` is ``"penalty"`` (uses ``penalty``) or ``"peak"`` (uses ``a_th``).
    Peak violation is charged when ``y_prev + elapsed > a_th``.
    """

    kind: str = "penalty"
    penalty: PenaltyFunction = PenaltyFunction()
    a_th: float = math.inf
    f: float = 0.0

    def __post_init__(self):
        if self.kind not in ("penalty", "peak"):
            raise ValueError(f"unknown cost kind {self.kind!r}")
        if self.f < 0:
            raise ValueError(f"transmission cost f must be >= 0, got {self.f}")
        if self.kind == "peak" and not self.a_th > 0:
            raise ValueError(f"a_th must be > 0, got {self.a_th}")

    def aoi_cost(self, y_prev: float, elapsed: float) -> float:
        if self.kind == "peak":
            return 1.0 if y_prev + elapsed > self.a_th else 0.0
        pen = self.penalty
        return _integral(pen.code, pen.gamma, pen.eta, y_prev, y_prev + elapsed)

    def delivery_cost(self, rec: DeliveryRecord) -> float:
        return rec.k * self.f + self.aoi_cost(rec.y_prev, rec.elapsed)


def penalty_integral_array(p: PenaltyFunction, a, b) -> np.ndarray:
    """Vectorized :func:`penalty_integral` (no argument checks)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    code, g = p.code, p.gamma
    if code == IDENTITY:
        return 0.5 * (b - a) * (b + a)
    if code == POWER:
        return (b ** (g + 1.0) - a ** (g + 1.0)) / (g + 1.0)
    if code == EXPONENTIAL:
        return np.exp(g * a) * np.expm1(g * (b - a)) / g
    if code == STEP:
        def anti(x):
            m = np.floor(g * x)
            return m * (m - 1) / (2.0 * g) + m * (x - m / g)
        return anti(b) - anti(a)
    return p.eta * (np.exp(g * a) * np.expm1(g * (b - a)) / g - (b - a))
