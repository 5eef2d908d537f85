"""Fast invariant suite behind ``aoi-pg check``."""

from __future__ import annotations

import math
import time

import numpy as np
from scipy import integrate

from .agents import Agent, Environment
from .backend import BACKENDS
from .channel import GilbertElliotDelay, LognormalMarkovDelay, eta_from_rho
from .config import ExperimentConfig
from .cost import CostModel, PenaltyFunction, penalty_integral
from .policy import FourierFeatures, StochasticPolicy, ValueFunction
from .sim import run_once
from .streams import RandomStream


def random_policy(rng, d=10):
    y_max = rng.uniform(1.0, 20.0)
    a_min = rng.uniform(0.0, 3.0)
    a_max = a_min + rng.uniform(0.5, 10.0)
    pol = StochasticPolicy(FourierFeatures(d, y_max), a_min, a_max, rng.uniform(0.2, 1.5))
    pol.theta[:] = rng.normal(0.0, 0.5, d)
    return pol


def fd_eligibility_error(pol, a, y, h=1e-6) -> float:
    """Largest relative error between the eligibility and central differences of log_pdf."""
    elig = pol.eligibility(a, y)
    num = np.empty_like(elig)
    for k in range(elig.size):
        base = pol.theta[k]
        pol.theta[k] = base + h
        up = pol.log_pdf(a, y)
        pol.theta[k] = base - h
        dn = pol.log_pdf(a, y)
        pol.theta[k] = base
        num[k] = (up - dn) / (2 * h)
    scale = max(np.max(np.abs(elig)), 1.0)
    return float(np.max(np.abs(num - elig)) / scale)


def check_gradients(n=200, seed=1):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n):
        pol = random_policy(rng)
        y = rng.uniform(0.0, pol.features.y_max * 0.999)
        a = pol.transform(pol.mu(y) + pol.sigma * rng.normal())
        worst = max(worst, fd_eligibility_error(pol, a, y))
    return worst <= 1e-5, f"max relative error {worst:.2e}"


def check_pdf(n=20, seed=2):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n):
        pol = random_policy(rng)
        y = rng.uniform(0.0, pol.features.y_max)
        worst = max(worst, abs(pdf_mass(pol, y) - 1.0))
    return worst <= 1e-6, f"max |mass - 1| {worst:.2e}"


def pdf_mass(pol, y) -> float:
    """Integral of the policy density over its support, in the logit variable."""
    mu = pol.mu(y)
    lo = pol.a_min
    w = pol.a_max - pol.a_min

    def integrand(u):
        a = lo + w / (1.0 + math.exp(-u))
        if not lo < a < pol.a_max:
            return 0.0
        da = w * math.exp(-u) / (1.0 + math.exp(-u)) ** 2
        return pol.pdf(a, y) * da

    span = 12.0 * pol.sigma
    pts = [mu - span, mu, mu + span]
    total = 0.0
    for a0, b0 in zip(pts[:-1], pts[1:]):
        total += integrate.quad(integrand, a0, b0, epsabs=1e-13, epsrel=1e-12, limit=200)[0]
    return total


def check_channels(n=200_000, seed=3):
    ln = LognormalMarkovDelay(RandomStream(seed), 1.5, eta_from_rho(0.5))
    mean = np.mean([ln.next_delay() for _ in range(n)])
    ge = GilbertElliotDelay(RandomStream(seed, "uniform"), 0.01, 0.04, 0.5, 1.0)
    frac = np.mean([ge.next_delay() == 1.0 for _ in range(n)])
    ok = abs(mean - 1.0) < 0.05 and abs(frac - 0.2) < 0.05
    return ok, f"lognormal mean {mean:.3f}, GE bad fraction {frac:.3f}"


def check_costs(n=200, seed=4):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n):
        kind = rng.choice(["identity", "power", "exponential", "scaled_exp"])
        pen = PenaltyFunction(str(kind), rng.uniform(0.2, 2.0), rng.uniform(0.5, 2.0))
        a = rng.uniform(0, 5)
        b = a + rng.uniform(0, 5)
        exact = penalty_integral(pen, a, b)
        num = integrate.quad(pen, a, b, epsabs=0, epsrel=1e-12)[0]
        worst = max(worst, abs(exact - num) / max(abs(num), 1e-300))
    return worst <= 1e-8, f"max relative error {worst:.2e}"


def check_backends():
    if len(BACKENDS) < 2:
        return True, "compiled kernel not built; nothing to compare"
    cfg = ExperimentConfig.from_dict({"channel": {"rho": 0.5}, "cost": {"f": 4},
                                      "agent": {"algorithm": "combined"},
                                      "sim": {"horizon": 2000, "replications": 1}})
    a = run_once(cfg, 0, "python")
    b = run_once(cfg, 0, "compiled")
    gap = abs(a.final_beta - b.final_beta) / a.final_beta
    return a.steps == b.steps and gap < 1e-9, f"steps {a.steps}/{b.steps}, beta gap {gap:.1e}"


def check_conservation(steps=5000, seed=5):
    channel = LognormalMarkovDelay(RandomStream(seed), 1.5, 0.6)
    env = Environment(channel, CostModel("penalty", PenaltyFunction("identity"), math.inf, 1.0))
    feats = FourierFeatures(10, 10.0)
    agent = Agent("combined", 1.0, RandomStream(seed + 1),
                  StochasticPolicy(feats, 0.0, 5.0, 0.5, "wait"),
                  StochasticPolicy(feats, 2.0, 10.0, 0.5, "discard"), ValueFunction(feats))
    agent.bootstrap(env)
    costs, durations = [], []
    for _ in range(steps):
        out = agent.step(env)
        costs.append(out.k * agent.f + out.c_u)
        durations.append(out.w)
    c = math.fsum(costs)
    d = 1.0 + math.fsum(durations)
    gap = abs(agent.beta_hat * agent.d_total - c) / c
    return gap <= 1e-9 and abs(agent.d_total - d) / d <= 1e-12, f"relative gap {gap:.1e}"


CHECKS = [
    ("eligibility vs finite differences", check_gradients),
    ("policy density normalization", check_pdf),
    ("channel stationarity smoke test", check_channels),
    ("penalty integrals vs quadrature", check_costs),
    ("compiled vs python backend", check_backends),
    ("cost/time bookkeeping conservation", check_conservation),
]


def run_checks(echo=print) -> bool:
    all_ok = True
    for name, fn in CHECKS:
        t = time.perf_counter()
        ok, detail = fn()
        all_ok &= ok
        echo(f"{'PASS' if ok else 'FAIL'}  {name}: {detail} ({time.perf_counter() - t:.2f}s)")
    return all_ok
