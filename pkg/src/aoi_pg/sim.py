"""Experiment engine: builds runs from a config, executes them, aggregates and writes CSVs."""

from __future__ import annotations

import csv
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .agents import Agent, AgentAbort, Environment
from .backend import get_run_steps
from .channel import GilbertElliotDelay, LognormalMarkovDelay
from .config import ChannelSpec, ExperimentConfig
from .cost import CostModel, PenaltyFunction
from .oracle import GeDiscardProblem, GeWaitProblem, ge_discard_optimize, ge_wait_optimize
from .policy import FourierFeatures, FourierFeatures2D, StochasticPolicy, ValueFunction
from .streams import RandomStream, derive_run_seed, spawn_streams

log = logging.getLogger(__name__)

POLICY_GRID = 200


class RunAborted(RuntimeError):
    def __init__(self, run_index: int, cause: Exception):
        super().__init__(f"run {run_index} aborted: {cause}")
        self.run_index = run_index
        self.cause = cause

    def __reduce__(self):
        # keep the two-argument constructor picklable across worker processes
        return type(self), (self.run_index, self.cause)


def build_channel(spec: ChannelSpec, seed):
    if spec.kind == "lognormal":
        return LognormalMarkovDelay(RandomStream(seed, "normal"), spec.sigma_d, spec.eta,
                                    spec.mean_scale)
    return GilbertElliotDelay(RandomStream(seed, "uniform"), spec.p, spec.q, spec.y0, spec.y1,
                              spec.state)


def build_cost(cfg: ExperimentConfig) -> CostModel:
    c = cfg.cost
    pen = PenaltyFunction(c.penalty, c.gamma, c.eta)
    if c.kind == "peak":
        return CostModel("peak", pen, c.a_th, c.f)
    return CostModel("penalty", pen, math.inf, c.f)


def build_features(cfg: ExperimentConfig, size: int):
    a = cfg.agent
    if cfg.sim.two_way is not None:
        return FourierFeatures2D(a.d1, a.d2, a.y_max, a.yb_max)
    return FourierFeatures(size, a.y_max)


def build_run(cfg: ExperimentConfig, run_index: int) -> tuple[Agent, Environment]:
    """Agent and environment for replication ``run_index``, seeded deterministically."""
    seed = derive_run_seed(cfg.sim.master_seed, run_index)
    fwd_ss, back_ss, pol_ss = spawn_streams(seed, 3)
    channel = build_channel(cfg.channel, fwd_ss)
    backward = build_channel(cfg.sim.two_way, back_ss) if cfg.sim.two_way is not None else None
    env = Environment(channel, build_cost(cfg), backward)

    a = cfg.agent
    kind = a.algorithm
    wait = discard = critic = None
    if kind in ("wait", "combined"):
        wait = StochasticPolicy(build_features(cfg, a.d), 0.0, a.z_max, a.sigma, "wait")
    if kind in ("discard", "combined"):
        discard = StochasticPolicy(build_features(cfg, a.d), a.x_min, a.x_max, a.sigma, "discard")
        critic = ValueFunction(build_features(cfg, a.n))
    stream = RandomStream(pol_ss, "normal") if kind in ("wait", "discard", "combined") else None
    agent = Agent(kind, cfg.cost.f, stream, wait, discard, critic, a.alpha_theta, a.alpha_omega,
                  x_max=a.x_max, table=a.table)
    return agent, env


@dataclass
class Trajectory:
    run_index: int
    records: np.ndarray  # columns: step, time, beta_hat, z, x, y
    policy_rows: list  # (y, mu, mean_action, kind)
    empirical: dict  # kind -> (sums, counts)
    final_beta: float
    c_total: float
    d_total: float
    steps: int
    theta: dict = field(default_factory=dict)
    omega: np.ndarray | None = None


def _policy_rows(agent: Agent, cfg: ExperimentConfig, env: Environment) -> list:
    ys = np.linspace(0.0, cfg.agent.y_max, POLICY_GRID)
    yb = env.backward.mean if env.backward is not None else 0.0
    rows = []
    for pol in (agent.wait, agent.discard):
        if pol is None:
            continue
        for y in ys:
            rows.append((float(y), pol.mu(y, yb), pol.mean_action(y, yb), pol.kind))
    if not rows:
        if agent.kind == "fixed":
            ty = agent._table_y
            for y in ys:
                z, x = agent._table_zx[int(np.argmin(np.abs(ty - y)))]
                rows.append((float(y), math.nan, z, "wait"))
                rows.append((float(y), math.nan, x, "discard"))
        elif agent.kind == "max_delay":
            rows = [(float(y), math.nan, agent.x_max, "discard") for y in ys]
        else:
            rows = [(float(y), math.nan, 0.0, "wait") for y in ys]
    return rows


def run_once(cfg: ExperimentConfig, run_index: int = 0, backend: str | None = None) -> Trajectory:
    """One replication: bootstrap delivery, then steps until ``D >= 1 + horizon``."""
    agent, env = build_run(cfg, run_index)
    agent.bootstrap(env)
    records = [(0, agent.d_total, agent.beta_hat, math.nan, math.nan, agent.y)]
    nb = cfg.sim.n_bins
    wait_sum, disc_sum = np.zeros(nb), np.zeros(nb)
    wait_cnt, disc_cnt = np.zeros(nb, dtype=np.int64), np.zeros(nb, dtype=np.int64)
    run_steps = get_run_steps(backend)
    try:
        run_steps(agent, env, 1.0 + cfg.sim.horizon, int(cfg.sim.max_steps),
                  int(cfg.sim.record_every), nb, cfg.agent.y_max, records,
                  wait_sum, wait_cnt, disc_sum, disc_cnt)
    except (AgentAbort, FloatingPointError) as exc:
        raise RunAborted(run_index, exc) from exc
    if records[-1][0] != agent.steps:
        records.append((agent.steps, agent.d_total, agent.beta_hat, math.nan, math.nan, agent.y))
    empirical = {}
    if agent.kind != "discard":
        empirical["wait"] = (wait_sum, wait_cnt)
    if disc_cnt.any() or agent.discard is not None:
        empirical["discard"] = (disc_sum, disc_cnt)
    theta = {}
    if agent.wait is not None:
        theta["wait"] = agent.wait.theta.copy()
    if agent.discard is not None:
        theta["discard"] = agent.discard.theta.copy()
    return Trajectory(
        run_index=run_index,
        records=np.array(records, dtype=float),
        policy_rows=_policy_rows(agent, cfg, env),
        empirical=empirical,
        final_beta=agent.beta_hat,
        c_total=agent.c_total,
        d_total=agent.d_total,
        steps=agent.steps,
        theta=theta,
        omega=agent.critic.omega.copy() if agent.critic is not None else None,
    )


def _run_job(args):
    cfg, i, backend = args
    return run_once(cfg, i, backend)


@dataclass
class Summary:
    config: ExperimentConfig
    runs: list
    curve: np.ndarray  # step, time_mean, beta_mean, beta_std
    final_mean: float
    final_std: float
    policy: list  # (y, mu_mean, mean_action_mean, kind)
    empirical: dict  # kind -> rows (bin_lo, bin_hi, count, mean_action)
    oracle_beta: float | None = None
    oracle_policy: tuple | None = None

    @property
    def finals(self) -> np.ndarray:
        return np.array([t.final_beta for t in self.runs])

    @property
    def gap_percent(self) -> float | None:
        if self.oracle_beta is None:
            return None
        return 100.0 * (self.final_mean - self.oracle_beta) / self.oracle_beta

    def ci95(self) -> tuple[float, float]:
        """Normal-approximation 95% interval for the mean final cost."""
        n = len(self.runs)
        half = 1.959963984540054 * self.final_std / math.sqrt(n) if n > 1 else 0.0
        return self.final_mean - half, self.final_mean + half


def _std(x) -> float:
    x = np.asarray(x, dtype=float)
    return float(x.std(ddof=1)) if x.size > 1 else 0.0


def aggregate(cfg: ExperimentConfig, runs: list) -> Summary:
    every = int(cfg.sim.record_every)
    per_run = []
    for t in runs:
        rec = t.records
        keep = (rec[:, 0] % every == 0)
        per_run.append({int(s): (tm, b) for s, tm, b in rec[keep][:, :3]})
    common = sorted(set.intersection(*(set(r) for r in per_run)))
    curve = np.array([
        (s, np.mean([r[s][0] for r in per_run]), np.mean([r[s][1] for r in per_run]),
         _std([r[s][1] for r in per_run]))
        for s in common
    ]).reshape(-1, 4)

    finals = [t.final_beta for t in runs]
    n_rows = len(runs[0].policy_rows)
    policy = []
    for i in range(n_rows):
        y, _, _, kind = runs[0].policy_rows[i]
        policy.append((y, float(np.mean([t.policy_rows[i][1] for t in runs])),
                       float(np.mean([t.policy_rows[i][2] for t in runs])), kind))

    nb = cfg.sim.n_bins
    edges = np.linspace(0.0, cfg.agent.y_max, nb + 1)
    empirical = {}
    for kind in runs[0].empirical:
        sums = sum(t.empirical[kind][0] for t in runs)
        counts = sum(t.empirical[kind][1] for t in runs)
        with np.errstate(invalid="ignore", divide="ignore"):
            mean = np.where(counts > 0, sums / np.maximum(counts, 1), np.nan)
        empirical[kind] = [(edges[b], edges[b + 1], int(counts[b]), float(mean[b]))
                           for b in range(nb)]
    return Summary(cfg, runs, curve, float(np.mean(finals)), _std(finals), policy, empirical)


def oracle_for(cfg: ExperimentConfig):
    """Reference optimum ``(policy, beta)`` when one is defined for this config, else None."""
    ch, a = cfg.channel, cfg.agent
    if ch.kind != "gilbert_elliot" or cfg.sim.two_way is not None or cfg.cost.kind != "penalty":
        return None
    pen = PenaltyFunction(cfg.cost.penalty, cfg.cost.gamma, cfg.cost.eta)
    if a.algorithm == "wait":
        prob = GeWaitProblem(ch.p, ch.q, ch.y0, ch.y1, cfg.cost.f, a.z_max, pen,
                             ch.state if ch.state is not None else 0)
        z0, z1, beta = ge_wait_optimize(prob)
        return (z0, z1), beta
    if a.algorithm == "discard":
        prob = GeDiscardProblem(ch.p, ch.q, ch.y0, ch.y1, cfg.cost.f, a.x_min, a.x_max, pen)
        x0, beta = ge_discard_optimize(prob)
        return (x0,), beta
    return None


def run_replicated(cfg: ExperimentConfig, jobs: int = 1, backend: str | None = None,
                   with_oracle: bool | None = None) -> Summary:
    """Run all replications (in parallel when ``jobs > 1``) and aggregate them."""
    R = int(cfg.sim.replications)
    args = [(cfg, i, backend) for i in range(R)]
    if jobs > 1 and R > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, R)) as pool:
            runs = list(pool.map(_run_job, args))
    else:
        runs = [_run_job(a) for a in args]
    summary = aggregate(cfg, runs)
    if with_oracle is None:
        with_oracle = cfg.sim.compare_oracle
    if with_oracle:
        found = oracle_for(cfg)
        if found is not None:
            summary.oracle_policy, summary.oracle_beta = found
    log.info("final beta %.6g +- %.3g over %d runs", summary.final_mean, summary.final_std, R)
    return summary


# --- CSV output -------------------------------------------------------------------------

RUNS_HEADER = ["run_id", "step", "time", "beta_hat"]
POLICY_HEADER = ["run_id", "y", "mu", "mean_action", "kind"]
EMPIRICAL_HEADER = ["run_id", "kind", "bin_lo", "bin_hi", "count", "mean_action"]
CURVE_HEADER = ["step", "time_mean", "beta_mean", "beta_std"]
SUMMARY_HEADER = ["config_hash", "final_beta_mean", "final_beta_std", "oracle_beta", "gap_percent"]


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return "" if math.isnan(v) else repr(v)
    return str(v)


def write_csv(path: Path, header: list, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def write_outputs(summary: Summary, out: Path) -> None:
    out = Path(out)
    runs_rows = ((t.run_index, int(r[0]), float(r[1]), float(r[2]))
                 for t in summary.runs for r in t.records)
    write_csv(out / "runs.csv", RUNS_HEADER, runs_rows)
    policy_rows = [(t.run_index, *row) for t in summary.runs for row in t.policy_rows]
    policy_rows += [("all", *row) for row in summary.policy]
    write_csv(out / "policy.csv", POLICY_HEADER, policy_rows)
    emp_rows = [("all", kind, lo, hi, c, m) for kind, rows in summary.empirical.items()
                for lo, hi, c, m in rows]
    write_csv(out / "policy_empirical.csv", EMPIRICAL_HEADER, emp_rows)
    write_csv(out / "curve.csv", CURVE_HEADER,
              ((int(r[0]), float(r[1]), float(r[2]), float(r[3])) for r in summary.curve))
    write_csv(out / "summary.csv", SUMMARY_HEADER,
              [(summary.config.hash(), summary.final_mean, summary.final_std,
                summary.oracle_beta, summary.gap_percent)])
    with open(out / "config.resolved.json", "w", encoding="utf-8") as fh:
        json.dump(summary.config.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_csv(path: Path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))
