"""Bounded transformed-lognormal policy and linear critic on cosine features."""

from __future__ import annotations

import math

import numpy as np

LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
# exp() argument guard for the logistic transform; far beyond the clamp anyway
G_LIMIT = 700.0
CLAMP_REL = 1e-9

_GH_NODES, _GH_WEIGHTS = np.polynomial.hermite_e.hermegauss(64)
_GH_WEIGHTS = _GH_WEIGHTS / _GH_WEIGHTS.sum()


class FourierFeatures:
    """Cosine basis ``cos(k*pi*y/y_max)``, k = 0..d-1, on ``[0, y_max]``."""

    ndim = 1

    def __init__(self, d: int = 10, y_max: float = 10.0):
        if d < 1:
            raise ValueError(f"d must be >= 1, got {d}")
        if not y_max > 0:
            raise ValueError(f"y_max must be > 0, got {y_max}")
        self.d = int(d)
        self.y_max = float(y_max)
        self._k = np.arange(self.d) * (math.pi / self.y_max)

    @property
    def size(self) -> int:
        return self.d

    def in_range(self, y: float, yb: float = 0.0) -> bool:
        return y < self.y_max

    def __call__(self, y: float, yb: float = 0.0) -> np.ndarray:
        return np.cos(self._k * min(y, self.y_max))


class FourierFeatures2D:
    """Two-state basis ``cos(j*pi*y/y_max + k*pi*yb/yb_max)`` for the two-way model.

    Index ``j*d2 + k`` holds the (j, k) term.
    """

    ndim = 2

    def __init__(self, d1: int = 10, d2: int = 10, y_max: float = 10.0, yb_max: float = 10.0):
        if d1 < 1 or d2 < 1:
            raise ValueError(f"d1 and d2 must be >= 1, got {d1}, {d2}")
        if not (y_max > 0 and yb_max > 0):
            raise ValueError("y_max and yb_max must be > 0")
        self.d1, self.d2 = int(d1), int(d2)
        self.y_max, self.yb_max = float(y_max), float(yb_max)
        j, k = np.meshgrid(np.arange(self.d1), np.arange(self.d2), indexing="ij")
        self._j = j.ravel() * (math.pi / self.y_max)
        self._k = k.ravel() * (math.pi / self.yb_max)

    @property
    def size(self) -> int:
        return self.d1 * self.d2

    def in_range(self, y: float, yb: float = 0.0) -> bool:
        return y < self.y_max and yb < self.yb_max

    def __call__(self, y: float, yb: float = 0.0) -> np.ndarray:
        return np.cos(self._j * min(y, self.y_max) + self._k * min(yb, self.yb_max))


class StochasticPolicy:
    """Policy over ``(a_min, a_max)`` obtained by squashing a lognormal sample.

    With ``G ~ N(mu(y), sigma**2)`` the action is
    ``a_max - (a_max - a_min)/(1 + exp(G))``; ``mu(y) = theta . f(y)``.
    Outside the feature domain the policy returns the fixed ``fallback``
    action: ``a_min`` for a wait policy, ``a_max`` for a discard policy.
    """

    def __init__(self, features, a_min: float, a_max: float, sigma: float = 0.5,
                 kind: str = "wait"):
        if not a_min < a_max:
            raise ValueError(f"need a_min < a_max, got {a_min}, {a_max}")
        if not sigma > 0:
            raise ValueError(f"sigma must be > 0, got {sigma}")
        if kind not in ("wait", "discard"):
            raise ValueError(f"policy kind must be 'wait' or 'discard', got {kind!r}")
        self.features = features
        self.a_min = float(a_min)
        self.a_max = float(a_max)
        self.sigma = float(sigma)
        self.kind = kind
        self.theta = np.zeros(features.size)
        self.eps = CLAMP_REL * (self.a_max - self.a_min)

    @property
    def fallback(self) -> float:
        return self.a_min if self.kind == "wait" else self.a_max

    def mu(self, y: float, yb: float = 0.0) -> float:
        return float(self.theta @ self.features(y, yb))

    def transform(self, g: float) -> float:
        g = min(max(g, -G_LIMIT), G_LIMIT)
        a = self.a_max - (self.a_max - self.a_min) / (1.0 + math.exp(g))
        return min(max(a, self.a_min + self.eps), self.a_max - self.eps)

    def logit(self, a: float) -> float:
        if not self.a_min < a < self.a_max:
            raise ValueError(f"action {a} outside open support ({self.a_min}, {self.a_max})")
        return math.log((a - self.a_min) / (self.a_max - a))

    def sample_action(self, y: float, stream, yb: float = 0.0) -> float:
        if not self.features.in_range(y, yb):
            return self.fallback
        return self.transform(self.mu(y, yb) + self.sigma * stream.draw())

    def log_pdf(self, a: float, y: float, yb: float = 0.0) -> float:
        z = (self.logit(a) - self.mu(y, yb)) / self.sigma
        return (math.log(self.a_max - self.a_min) - math.log(a - self.a_min)
                - math.log(self.a_max - a) - math.log(self.sigma) - LOG_SQRT_2PI
                - 0.5 * z * z)

    def pdf(self, a: float, y: float, yb: float = 0.0) -> float:
        return math.exp(self.log_pdf(a, y, yb))

    def eligibility(self, a: float, y: float, yb: float = 0.0) -> np.ndarray:
        """Gradient of ``log_pdf`` with respect to ``theta``."""
        f = self.features(y, yb)
        return (self.logit(a) - float(self.theta @ f)) / (self.sigma * self.sigma) * f

    def update(self, delta: float, elig: np.ndarray, alpha: float) -> None:
        if not math.isfinite(delta):
            raise FloatingPointError(f"non-finite delta {delta}")
        self.theta += (alpha * delta) * elig

    def median_action(self, y: float, yb: float = 0.0) -> float:
        if not self.features.in_range(y, yb):
            return self.fallback
        return self.transform(self.mu(y, yb))

    def mean_action(self, y: float, yb: float = 0.0) -> float:
        """E[action | y] by Gauss-Hermite quadrature over the latent Gaussian."""
        if not self.features.in_range(y, yb):
            return self.fallback
        g = self.mu(y, yb) + self.sigma * _GH_NODES
        s = 0.5 * (1.0 + np.tanh(0.5 * g))
        return float(self.a_min + (self.a_max - self.a_min) * (_GH_WEIGHTS @ s))


class ValueFunction:
    """Linear state-value estimate ``omega . f(y)``."""

    def __init__(self, features):
        self.features = features
        self.omega = np.zeros(features.size)

    def value(self, y: float, yb: float = 0.0) -> float:
        return float(self.omega @ self.features(y, yb))

    def gradient(self, y: float, yb: float = 0.0) -> np.ndarray:
        return self.features(y, yb)

    def update(self, delta: float, alpha: float, y: float, yb: float = 0.0) -> None:
        if not math.isfinite(delta):
            raise FloatingPointError(f"non-finite delta {delta}")
        self.omega += (alpha * delta) * self.features(y, yb)
