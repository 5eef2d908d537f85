"""``aoi-pg`` command line: run, sweep, oracle, check.

Exit codes: 0 success, 1 failed check, 2 invalid config or arguments,
3 run aborted at runtime (diverging learning signal, livelocked discard).
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import shutil
import sys
import tempfile
from contextlib import contextmanager
from pathlib import Path

from .config import ConfigError, ExperimentConfig, load_config
from .cost import PenaltyFunction
from .oracle import (GeDiscardProblem, GeWaitProblem, ge_discard_average_cost,
                     ge_discard_optimize, ge_wait_average_cost, ge_wait_optimize)
from .sim import RunAborted, run_replicated, write_csv, write_outputs

log = logging.getLogger("aoi_pg")

EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_RUNTIME = 3

SWEEP_HEADER = ["axis_value", "final_beta_mean", "final_beta_std", "oracle_beta", "baseline_beta"]


def _setup_logging():
    level = os.environ.get("AOI_PG_LOG", "error").lower()
    levels = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}
    logging.basicConfig(level=levels.get(level, logging.ERROR),
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")


@contextmanager
def staged_output(out: Path, force: bool):
    """Write into a temporary sibling directory and move it into place on success."""
    out = Path(out)
    if out.exists() and not force:
        raise FileExistsError(f"output directory {out} exists (use --force to replace it)")
    out.parent.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(prefix=f".{out.name}.", dir=out.parent))
    try:
        yield tmp
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    if out.exists():
        shutil.rmtree(out)
    os.replace(tmp, out)


def _load(args) -> ExperimentConfig:
    cfg = load_config(args.config)
    if getattr(args, "seed", None) is not None:
        cfg.sim.master_seed = int(args.seed)
    return cfg


def _default_out(cfg: ExperimentConfig, prefix: str) -> Path:
    return Path("aoi_out") / f"{prefix}-{cfg.hash()}"


def baseline_config(cfg: ExperimentConfig) -> ExperimentConfig | None:
    """Null policy matching the configured strategy (zero-wait or maximum-delay)."""
    algo = cfg.agent.algorithm
    if algo in ("wait", "zero_wait"):
        null = "zero_wait"
    elif algo in ("discard", "combined", "max_delay"):
        null = "max_delay"
    else:
        return None
    base = cfg.with_value("agent.algorithm", null)
    base.sim.compare_oracle = False
    return base


GNUPLOT_BETA = """set datafile separator ','
set key autotitle columnhead
set xlabel 'time'
set ylabel 'time-average cost'
plot 'curve.csv' using 2:3 with lines title 'mean beta'
pause -1
"""

GNUPLOT_POLICY = """set datafile separator ','
set xlabel 'state y'
set ylabel 'action'
plot "< grep '^all,.*,wait$' policy.csv" using 2:4 with lines title 'wait (mean action)', \\
     "< grep '^all,.*,discard$' policy.csv" using 2:4 with lines title 'discard (mean action)'
pause -1
"""


def cmd_run(args) -> int:
    cfg = _load(args)
    out = Path(args.out) if args.out else _default_out(cfg, "run")
    with staged_output(out, args.force) as tmp:
        summary = run_replicated(cfg, jobs=args.jobs)
        write_outputs(summary, tmp)
        if args.emit_plots:
            (tmp / "plot_beta.gp").write_text(GNUPLOT_BETA, encoding="utf-8")
            (tmp / "plot_policy.gp").write_text(GNUPLOT_POLICY, encoding="utf-8")
    lo, hi = summary.ci95()
    print(f"final beta {summary.final_mean:.6g} (std {summary.final_std:.3g}, "
          f"95% CI [{lo:.6g}, {hi:.6g}], {len(summary.runs)} runs)")
    if summary.oracle_beta is not None:
        print(f"oracle beta {summary.oracle_beta:.6g}, gap {summary.gap_percent:.2f}%")
    print(f"wrote {out}")
    return 0


def cmd_sweep(args) -> int:
    cfg = _load(args)
    if cfg.sim.sweep is None:
        raise ConfigError("sim.sweep", "sweep command needs a sim.sweep section")
    axis, values = cfg.sim.sweep.axis, cfg.sim.sweep.values
    points = [cfg.with_value(axis, v) for v in values]
    out = Path(args.out) if args.out else _default_out(cfg, "sweep")
    rows, policy_rows = [], []
    with staged_output(out, args.force) as tmp:
        for v, point in zip(values, points):
            s = run_replicated(point, jobs=args.jobs)
            base_cfg = baseline_config(point)
            base = run_replicated(base_cfg, jobs=args.jobs).final_mean if base_cfg else None
            rows.append((v, s.final_mean, s.final_std, s.oracle_beta, base))
            policy_rows += [(v, *r) for r in s.policy]
            print(f"{axis}={v}: beta {s.final_mean:.6g} +- {s.final_std:.3g}"
                  + (f", oracle {s.oracle_beta:.6g}" if s.oracle_beta is not None else "")
                  + (f", baseline {base:.6g}" if base is not None else ""))
        write_csv(tmp / "sweep.csv", SWEEP_HEADER, rows)
        write_csv(tmp / "sweep_policy.csv", ["axis_value", "y", "mu", "mean_action", "kind"],
                  policy_rows)
        (tmp / "config.resolved.json").write_text(
            json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(f"wrote {out}")
    return 0


def cmd_oracle(args) -> int:
    cfg = _load(args)
    ch = cfg.channel
    if ch.kind != "gilbert_elliot":
        raise ConfigError("channel.kind", "oracle needs a gilbert_elliot channel")
    if cfg.cost.kind != "penalty":
        raise ConfigError("cost.kind", "oracle supports penalty costs only")
    pen = PenaltyFunction(cfg.cost.penalty, cfg.cost.gamma, cfg.cost.eta)
    out = Path(args.out) if args.out else Path(".")
    out.mkdir(parents=True, exist_ok=True)
    if args.problem == "ge-wait":
        prob = GeWaitProblem(ch.p, ch.q, ch.y0, ch.y1, cfg.cost.f, cfg.agent.z_max, pen,
                             ch.state if ch.state is not None else 0)
        z0, z1, beta = ge_wait_optimize(prob)
        zero = ge_wait_average_cost(prob, 0.0, 0.0)
        write_csv(out / "oracle.csv", ["z0", "z1", "beta", "zero_wait_beta"], [(z0, z1, beta, zero)])
        print(f"z0*={z0:.6f} z1*={z1:.6f} beta*={beta:.6f} (zero-wait {zero:.6f})")
    else:
        prob = GeDiscardProblem(ch.p, ch.q, ch.y0, ch.y1, cfg.cost.f, cfg.agent.x_min,
                                cfg.agent.x_max, pen)
        x0, beta = ge_discard_optimize(prob)
        maxd = ge_discard_average_cost(prob, cfg.agent.x_max) if cfg.agent.x_max >= ch.y0 else math.nan
        write_csv(out / "oracle.csv", ["x0", "beta", "max_delay_beta"], [(x0, beta, maxd)])
        print(f"x0*={x0:.6f} beta*={beta:.6f} (maximum-delay {maxd:.6f})")
    return 0


def cmd_check(args) -> int:
    from .check import run_checks
    return 0 if run_checks() else EXIT_CHECK_FAILED


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="aoi-pg", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out_help):
        p.add_argument("--config", required=True, help="experiment config (JSON)")
        p.add_argument("--seed", type=int, help="override sim.master_seed")
        p.add_argument("--out", help=out_help)
        p.add_argument("--jobs", type=int, default=1, help="parallel replications")
        p.add_argument("--force", action="store_true", help="replace an existing output directory")

    p = sub.add_parser("run", help="run replicated experiment")
    common(p, "output directory (default aoi_out/run-<config hash>)")
    p.add_argument("--emit-plots", action="store_true", help="also write gnuplot scripts")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="run one experiment per value of sim.sweep.axis")
    common(p, "output directory (default aoi_out/sweep-<config hash>)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("oracle", help="optimal fixed policy on the Gilbert-Elliot channel")
    p.add_argument("problem", choices=["ge-wait", "ge-discard"])
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="directory for oracle.csv (default: current directory)")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("check", help="fast invariant self-test")
    p.set_defaults(func=cmd_check)
    return parser


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileExistsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, TypeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except RunAborted as exc:
        print(f"run aborted: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
