"""Small config builders shared by the test modules."""

from aoi_pg.config import ExperimentConfig


def make_config(channel=None, cost=None, agent=None, sim=None) -> ExperimentConfig:
    data = {
        "channel": channel or {"kind": "lognormal", "sigma_d": 1.5, "rho": 0.5},
        "cost": cost or {"kind": "penalty", "penalty": "identity", "f": 1.0},
        "agent": agent or {"algorithm": "wait"},
        "sim": {"horizon": 2000, "replications": 2, "master_seed": 0, "record_every": 10,
                "compare_oracle": False, **(sim or {})},
    }
    return ExperimentConfig.from_dict(data)


DETERMINISTIC = {"kind": "gilbert_elliot", "p": 0.0, "q": 0.0, "y0": 1.0, "y1": 1.0, "state": 0}
GE_DISCARD = {"kind": "gilbert_elliot", "p": 0.1, "q": 0.9, "y0": 1.0, "y1": 10.0}
