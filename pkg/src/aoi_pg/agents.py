"""Online learners for the wait, discard and combined strategies, plus baselines.

Each agent keeps the running cost ``C`` and time ``D`` (``D`` starts at 1) and
processes one delivery per :meth:`Agent.step`.  Bookkeeping order inside a
step is fixed: accrue the cost into ``C``, form ``delta`` with the updated
``C`` and the not-yet-updated ``D``, update the parameters, then advance
``D`` by the step duration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cost import CostModel
from .policy import StochasticPolicy, ValueFunction

LEARNING_KINDS = ("wait", "discard", "combined")
BASELINE_KINDS = ("zero_wait", "max_delay", "fixed")
AGENT_KINDS = LEARNING_KINDS + BASELINE_KINDS

MAX_ATTEMPTS = 1_000_000
DELTA_LIMIT = 1e12


class AgentAbort(RuntimeError):
    """Raised when a run cannot continue (diverging delta, livelocked discard)."""


class CompensatedSum:
    """Neumaier running sum."""

    __slots__ = ("total", "comp")

    def __init__(self, start: float = 0.0):
        self.total = float(start)
        self.comp = 0.0

    def add(self, x: float) -> None:
        t = self.total + x
        if abs(self.total) >= abs(x):
            self.comp += (self.total - t) + x
        else:
            self.comp += (x - t) + self.total
        self.total = t

    @property
    def value(self) -> float:
        return self.total + self.comp


class Environment:
    """Channel plus cost model as seen by an agent.

    The agent only observes delays and the AoI cost ``c_u`` of each delivery;
    it never looks inside the cost model.
    """

    def __init__(self, channel, cost: CostModel, backward=None):
        self.channel = channel
        self.cost = cost
        self.backward = backward

    @property
    def two_way(self) -> bool:
        return self.backward is not None

    def attempt(self) -> float:
        return self.channel.next_delay()

    def aoi_cost(self, y_prev: float, elapsed: float) -> float:
        return self.cost.aoi_cost(y_prev, elapsed)

    def feedback_delay(self) -> float:
        return self.backward.next_delay() if self.backward is not None else 0.0


@dataclass
class StepOutcome:
    y: float
    yb: float
    z: float
    x: float
    k: int
    y_next: float
    w: float
    c_u: float
    delta: float = 0.0
    learned: bool = False


class Agent:
    """State machine for one run of a learning algorithm or a fixed baseline.

    ``kind`` is one of ``wait`` (policy gradient on the wait time), ``discard``
    (actor-critic on the discard threshold), ``combined`` (both policies and
    a shared critic), ``zero_wait``, ``max_delay`` or ``fixed`` (tabular
    ``{state: (z, x)}`` lookup by nearest state).
    """

    def __init__(self, kind: str, f: float, stream=None, wait: StochasticPolicy | None = None,
                 discard: StochasticPolicy | None = None, critic: ValueFunction | None = None,
                 alpha_theta: float = 1e-4, alpha_omega: float = 1e-3,
                 x_max: float = math.inf, table: dict | None = None):
        if kind not in AGENT_KINDS:
            raise ValueError(f"unknown agent kind {kind!r}")
        if kind in ("wait", "combined") and wait is None:
            raise ValueError(f"{kind} agent needs a wait policy")
        if kind in ("discard", "combined") and (discard is None or critic is None):
            raise ValueError(f"{kind} agent needs a discard policy and a critic")
        if kind in LEARNING_KINDS and stream is None:
            raise ValueError("learning agents need a policy random stream")
        if kind == "fixed" and not table:
            raise ValueError("fixed agent needs a non-empty table")
        self.kind = kind
        self.f = float(f)
        self.stream = stream
        self.wait = wait if kind in ("wait", "combined") else None
        self.discard = discard if kind in ("discard", "combined") else None
        self.critic = critic if kind in ("discard", "combined") else None
        self.alpha_theta = float(alpha_theta)
        self.alpha_omega = float(alpha_omega)
        if kind == "max_delay" and discard is not None and not math.isfinite(x_max):
            x_max = discard.a_max
        self.x_max = float(x_max)
        if kind == "fixed":
            keys = sorted(table)
            self._table_y = np.array(keys, dtype=float)
            self._table_zx = [tuple(map(float, table[k])) for k in keys]
        self.c = CompensatedSum(0.0)
        self.d = CompensatedSum(1.0)
        self.y = 0.0
        self.yb = 0.0
        self.steps = 0
        self.last_delta = 0.0

    @property
    def learning(self) -> bool:
        return self.kind in LEARNING_KINDS

    @property
    def c_total(self) -> float:
        return self.c.value

    @property
    def d_total(self) -> float:
        return self.d.value

    @property
    def beta_hat(self) -> float:
        return self.c.value / self.d.value

    def _null_threshold(self) -> float:
        if self.discard is not None:
            return self.discard.a_max
        if self.kind == "max_delay":
            return self.x_max
        return math.inf

    def _deliver(self, env: Environment, x: float) -> tuple[int, float]:
        k = 1
        delay = env.attempt()
        while delay > x:
            k += 1
            if k > MAX_ATTEMPTS:
                raise AgentAbort(f"discard threshold {x} cancelled {MAX_ATTEMPTS} attempts in a row")
            delay = env.attempt()
        return k, delay

    def bootstrap(self, env: Environment) -> None:
        """One delivery with the null action to obtain the first state; no cost accrues."""
        _, self.y = self._deliver(env, self._null_threshold())
        self.yb = env.feedback_delay()

    def _actions(self) -> tuple[float, float]:
        y, yb = self.y, self.yb
        if self.kind == "zero_wait":
            return 0.0, math.inf
        if self.kind == "max_delay":
            return 0.0, self.x_max
        if self.kind == "fixed":
            i = int(np.argmin(np.abs(self._table_y - y)))
            return self._table_zx[i]
        z = self.wait.sample_action(y, self.stream, yb) if self.wait is not None else 0.0
        x = self.discard.sample_action(y, self.stream, yb) if self.discard is not None else math.inf
        return z, x

    def step(self, env: Environment) -> StepOutcome:
        y, yb = self.y, self.yb
        z, x = self._actions()
        k, y_next = self._deliver(env, x)
        w = yb + z + y_next
        if k > 1:
            w += (k - 1) * x
        c_u = env.aoi_cost(y, w)
        yb_next = env.feedback_delay()

        step_cost = k * self.f + c_u
        self.c.add(step_cost)
        out = StepOutcome(y, yb, z, x, k, y_next, w, c_u)
        if self.learning:
            feats = self.wait.features if self.wait is not None else self.discard.features
            if feats.in_range(y, yb):
                self._learn(out, step_cost, y_next, yb_next, feats)
        self.d.add(w)
        self.y, self.yb = y_next, yb_next
        self.steps += 1
        return out

    def _learn(self, out: StepOutcome, step_cost: float, y_next: float, yb_next: float,
               feats) -> None:
        f_now = feats(out.y, out.yb)
        delta = -step_cost + out.w * self.c.value / self.d.value
        if self.critic is not None:
            omega = self.critic.omega
            delta += float(omega @ feats(y_next, yb_next)) - float(omega @ f_now)
        if not math.isfinite(delta) or abs(delta) > DELTA_LIMIT:
            raise AgentAbort(f"delta={delta} at step {self.steps} (state y={out.y}, yb={out.yb}, "
                             f"C={self.c.value}, D={self.d.value})")
        step = self.alpha_theta * delta
        for pol, a in ((self.wait, out.z), (self.discard, out.x)):
            if pol is None:
                continue
            score = (pol.logit(a) - float(pol.theta @ f_now)) / (pol.sigma * pol.sigma)
            pol.theta += (step * score) * f_now
        if self.critic is not None:
            self.critic.omega += (self.alpha_omega * delta) * f_now
        out.delta = delta
        out.learned = True
        self.last_delta = delta
