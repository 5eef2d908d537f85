import math

import numpy as np
import pytest

from aoi_pg.agents import Agent, AgentAbort, CompensatedSum, Environment
from aoi_pg.channel import GilbertElliotDelay
from aoi_pg.cost import CostModel, PenaltyFunction
from aoi_pg.policy import FourierFeatures, StochasticPolicy, ValueFunction
from aoi_pg.streams import RandomStream


class ScriptedChannel:
    """Replays a fixed list of delays."""

    def __init__(self, delays):
        self._it = iter(delays)

    def next_delay(self):
        return next(self._it)


def deterministic_env(f=1.0, y=1.0):
    ch = GilbertElliotDelay(RandomStream(0, "uniform"), p=0.0, q=0.0, y0=y, y1=y + 9.0, state=0)
    return Environment(ch, CostModel(penalty=PenaltyFunction("identity"), f=f))


def wait_agent(f=1.0, **kw):
    feats = FourierFeatures(10, 10.0)
    pol = StochasticPolicy(feats, 0.0, 5.0, 0.5, "wait")
    return Agent("wait", f, RandomStream(1), wait=pol, **kw)


def discard_agent(f=4.0, a_min=1.0, a_max=10.0, **kw):
    feats = FourierFeatures(10, 10.0)
    pol = StochasticPolicy(feats, a_min, a_max, 0.5, "discard")
    return Agent("discard", f, RandomStream(1), discard=pol, critic=ValueFunction(feats), **kw)


def test_compensated_sum_beats_naive():
    s = CompensatedSum(1.0)
    naive = 1.0
    for _ in range(10_000):
        s.add(1e-16)
        naive += 1e-16
    assert naive == 1.0
    assert s.value == pytest.approx(1.0 + 1e-12, rel=1e-15)


def test_delta_formula_example():
    # C=10 after the increment, D=5, W=1, F=1, c_u=1 -> delta = -2 + 10/5 = 0
    agent = wait_agent(f=1.0)
    agent.c.add(8.0)
    agent.d.add(4.0)
    agent.y = 2.0
    env = Environment(ScriptedChannel([0.5]), CostModel(kind="peak", a_th=0.1, f=1.0))
    agent._actions = lambda: (0.5, math.inf)  # W = 0.5 + 0.5 = 1 and c_u = 1
    out = agent.step(env)
    assert out.w == 1.0 and out.c_u == 1.0
    assert out.learned and out.delta == pytest.approx(0.0, abs=1e-15)
    assert agent.wait.theta == pytest.approx(np.zeros(10), abs=0)


def test_zero_cost_world_leaves_theta():
    agent = wait_agent(f=0.0)
    env = Environment(ScriptedChannel([1.0] * 50), CostModel(kind="peak", a_th=1e9, f=0.0))
    agent.bootstrap(env)
    for _ in range(40):
        assert agent.step(env).delta == 0.0
    assert not agent.wait.theta.any()


def test_discard_trace():
    agent = discard_agent(f=4.0)
    agent.y = 1.0
    agent._actions = lambda: (0.0, 5.0)
    env = Environment(ScriptedChannel([10.0, 1.0]), CostModel(f=4.0))
    out = agent.step(env)
    assert out.k == 2 and out.w == 6.0 and out.y_next == 1.0
    assert agent.c_total == pytest.approx(2 * 4.0 + (7.0 ** 2 - 1.0) / 2)


def test_delivery_on_equal_delay():
    agent = discard_agent()
    agent.y = 1.0
    agent._actions = lambda: (0.0, 5.0)
    out = agent.step(Environment(ScriptedChannel([5.0]), CostModel(f=4.0)))
    assert out.k == 1


def test_zero_omega_critic_matches_wait_style_delta():
    agent = discard_agent(f=4.0)
    agent.c.add(3.0)
    agent.y = 2.0
    agent._actions = lambda: (0.0, 5.0)
    out = agent.step(Environment(ScriptedChannel([7.0, 2.0]), CostModel(f=4.0)))
    expect = -(2 * 4.0 + out.c_u) + out.w * agent.c_total / (agent.d_total - out.w)
    assert out.delta == pytest.approx(expect, rel=1e-14)


def test_zero_wait_deterministic_value():
    agent = Agent("zero_wait", 1.0)
    env = deterministic_env()
    agent.bootstrap(env)
    assert agent.c_total == 0.0 and agent.d_total == 1.0
    for _ in range(1000):
        agent.step(env)
    assert agent.beta_hat == pytest.approx(2.5, rel=2e-3)


def test_fixed_optimal_wait_deterministic_value():
    z = math.sqrt(2) - 1
    agent = Agent("fixed", 1.0, table={0.0: (z, math.inf)})
    env = deterministic_env()
    agent.bootstrap(env)
    for _ in range(20_000):
        agent.step(env)
    assert agent.beta_hat == pytest.approx(1 + math.sqrt(2), rel=1e-4)


def test_max_delay_never_cancels():
    ch = GilbertElliotDelay(RandomStream(5, "uniform"), 0.1, 0.9, 1.0, 10.0)
    agent = Agent("max_delay", 4.0, x_max=10.0)
    env = Environment(ch, CostModel(f=4.0))
    agent.bootstrap(env)
    assert all(agent.step(env).k == 1 for _ in range(2000))


def test_baselines_do_not_learn():
    for kind in ("zero_wait", "max_delay"):
        agent = Agent(kind, 1.0, x_max=10.0)
        env = deterministic_env()
        agent.bootstrap(env)
        assert not any(agent.step(env).learned for _ in range(100))


def test_bookkeeping_identity():
    ch = GilbertElliotDelay(RandomStream(5, "uniform"), 0.1, 0.9, 1.0, 10.0)
    agent = discard_agent(f=4.0)
    env = Environment(ch, CostModel(f=4.0))
    agent.bootstrap(env)
    cost, dur = 0.0, 1.0
    for _ in range(5000):
        out = agent.step(env)
        cost += out.k * 4.0 + out.c_u
        dur += out.w
    assert agent.c_total == pytest.approx(cost, rel=1e-12)
    assert agent.d_total == pytest.approx(dur, rel=1e-12)
    assert agent.beta_hat * agent.d_total == pytest.approx(agent.c_total, rel=1e-12)


def test_combined_shares_delta():
    feats = FourierFeatures(4, 10.0)
    w = StochasticPolicy(feats, 0.0, 5.0, 0.5, "wait")
    d = StochasticPolicy(feats, 1.0, 10.0, 0.5, "discard")
    agent = Agent("combined", 4.0, RandomStream(2), wait=w, discard=d, critic=ValueFunction(feats),
                  alpha_theta=1e-3, alpha_omega=1e-2)
    ch = GilbertElliotDelay(RandomStream(5, "uniform"), 0.1, 0.9, 1.0, 10.0)
    env = Environment(ch, CostModel(f=4.0))
    agent.bootstrap(env)
    for _ in range(50):
        tw, td, om = w.theta.copy(), d.theta.copy(), agent.critic.omega.copy()
        out = agent.step(env)
        f0 = feats(out.y)
        sw = (w.logit(out.z) - tw @ f0) / 0.25
        sd = (d.logit(out.x) - td @ f0) / 0.25
        assert np.allclose(w.theta - tw, 1e-3 * out.delta * sw * f0, rtol=1e-9, atol=1e-15)
        assert np.allclose(d.theta - td, 1e-3 * out.delta * sd * f0, rtol=1e-9, atol=1e-15)
        assert np.allclose(agent.critic.omega - om, 1e-2 * out.delta * f0, rtol=1e-9, atol=1e-15)


def test_out_of_range_state_uses_fallback_without_update():
    agent = discard_agent()
    agent.y = 15.0
    out = agent.step(Environment(ScriptedChannel([12.0, 3.0]), CostModel(f=4.0)))
    assert out.x == 10.0 and out.k == 2 and out.w == 13.0
    assert not out.learned and not agent.discard.theta.any() and not agent.critic.omega.any()


def test_abort_on_divergent_delta():
    agent = wait_agent(f=0.0)
    env = Environment(ScriptedChannel([1.0] * 10),
                      CostModel(penalty=PenaltyFunction("exponential", gamma=800.0)))
    agent.bootstrap(env)
    with pytest.raises(AgentAbort):
        agent.step(env)


def test_abort_on_livelocked_discard():
    agent = discard_agent(a_min=0.1, a_max=10.0)
    agent.y = 1.0
    agent._actions = lambda: (0.0, 0.5)
    ch = GilbertElliotDelay(RandomStream(0, "uniform"), 0.0, 0.0, 1.0, 2.0, state=0)
    with pytest.raises(AgentAbort):
        agent.step(Environment(ch, CostModel(f=1.0)))


def test_constructor_validation():
    with pytest.raises(ValueError):
        Agent("hold", 1.0)
    with pytest.raises(ValueError):
        Agent("wait", 1.0, RandomStream(0))
    with pytest.raises(ValueError):
        Agent("fixed", 1.0, table={})
