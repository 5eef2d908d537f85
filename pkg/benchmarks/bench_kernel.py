"""Time the delivery loop on both backends for a few representative configs.

    python3 benchmarks/bench_kernel.py [--horizon 50000] [--repeat 3]

Both backends consume the same random streams, so the script also reports
the largest difference in final beta_hat between them.
"""

import argparse
import time

from aoi_pg.backend import BACKENDS
from aoi_pg.config import ExperimentConfig
from aoi_pg.sim import run_once

CASES = {
    "wait/lognormal": {
        "channel": {"kind": "lognormal", "sigma_d": 1.5, "rho": 0.5},
        "cost": {"penalty": "identity", "f": 0},
        "agent": {"algorithm": "wait"},
    },
    "discard/gilbert-elliot": {
        "channel": {"kind": "gilbert_elliot", "p": 0.1, "q": 0.9, "y0": 1, "y1": 10},
        "cost": {"penalty": "identity", "f": 4},
        "agent": {"algorithm": "discard"},
    },
    "combined/power": {
        "channel": {"kind": "lognormal", "sigma_d": 1.5, "rho": 0.5},
        "cost": {"penalty": "power", "gamma": 1.5, "f": 4},
        "agent": {"algorithm": "combined"},
    },
    "wait/two-way": {
        "channel": {"kind": "lognormal", "sigma_d": 1.5, "rho": 0.5},
        "cost": {"penalty": "identity", "f": 0},
        "agent": {"algorithm": "wait"},
        "sim": {"two_way": {"kind": "lognormal", "sigma_d": 1.5, "rho": 0.5}},
    },
}


def best_time(cfg, backend, repeat):
    best, traj = float("inf"), None
    for _ in range(repeat):
        t0 = time.perf_counter()
        traj = run_once(cfg, 0, backend=backend)
        best = min(best, time.perf_counter() - t0)
    return best, traj


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--horizon", type=float, default=50_000)
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args(argv)

    backends = sorted(BACKENDS)
    print(f"backends: {', '.join(backends)}; horizon {args.horizon:g}, best of {args.repeat}")
    print(f"{'case':<24}{'steps':>9}" + "".join(f"{b + ' [s]':>14}" for b in backends)
          + f"{'speedup':>10}{'max |dbeta|':>14}")
    for name, data in CASES.items():
        data = dict(data)
        data["sim"] = {**data.get("sim", {}), "horizon": args.horizon, "replications": 1,
                       "compare_oracle": False}
        cfg = ExperimentConfig.from_dict(data)
        times, finals, steps = {}, {}, 0
        for b in backends:
            times[b], traj = best_time(cfg, b, args.repeat)
            finals[b] = traj.final_beta
            steps = traj.steps
        row = f"{name:<24}{steps:>9}" + "".join(f"{times[b]:>14.4f}" for b in backends)
        if "compiled" in times:
            diff = abs(finals["compiled"] - finals["python"])
            row += f"{times['python'] / times['compiled']:>9.1f}x{diff:>14.2e}"
        print(row)


if __name__ == "__main__":
    main()
