"""Experiment configuration: a JSON document with channel/cost/agent/sim sections."""

from __future__ import annotations

import copy
import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .agents import AGENT_KINDS
from .channel import eta_from_rho, rho_label
from .cost import PENALTY_KINDS


class ConfigError(ValueError):
    """Invalid configuration; ``key`` is the dotted path of the offending entry."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


@dataclass
class ChannelSpec:
    kind: str = "lognormal"
    sigma_d: float = 1.5
    eta: float | None = None
    rho: float | None = None
    mean_scale: float = 1.0
    p: float = 0.01
    q: float = 0.04
    y0: float = 0.5
    y1: float = 1.0
    state: int | None = None

    def resolve(self, key: str) -> None:
        if self.kind not in ("lognormal", "gilbert_elliot"):
            raise ConfigError(f"{key}.kind", f"unknown channel kind {self.kind!r}")
        if self.kind == "lognormal":
            if self.eta is None and self.rho is None:
                self.eta = 0.0
            if self.eta is None:
                _check(0 <= self.rho <= 1, f"{key}.rho", "must lie in [0, 1]")
                self.eta = eta_from_rho(self.rho)
            _check(0 <= self.eta <= 1, f"{key}.eta", "must lie in [0, 1]")
            self.rho = rho_label(self.eta)
            _check(self.sigma_d > 0, f"{key}.sigma_d", "must be > 0")
            _check(self.mean_scale > 0, f"{key}.mean_scale", "must be > 0")
        else:
            _check(0 <= self.p <= 1, f"{key}.p", "must lie in [0, 1]")
            _check(0 <= self.q <= 1, f"{key}.q", "must lie in [0, 1]")
            _check(0 <= self.y0 <= self.y1, f"{key}.y0", "need 0 <= y0 <= y1")
            _check(self.state in (None, 0, 1), f"{key}.state", "must be 0, 1 or null")


@dataclass
class CostSpec:
    kind: str = "penalty"
    penalty: str = "identity"
    gamma: float = 1.0
    eta: float = 1.0
    a_th: float | None = None
    f: float = 0.0

    def resolve(self, key: str) -> None:
        _check(self.kind in ("penalty", "peak"), f"{key}.kind", f"unknown cost kind {self.kind!r}")
        _check(self.penalty in PENALTY_KINDS, f"{key}.penalty",
               f"unknown penalty {self.penalty!r}; choose from {sorted(PENALTY_KINDS)}")
        _check(self.gamma > 0, f"{key}.gamma", "must be > 0")
        _check(self.eta > 0, f"{key}.eta", "must be > 0")
        _check(self.f >= 0, f"{key}.f", "must be >= 0")
        if self.kind == "peak":
            _check(self.a_th is not None and self.a_th > 0, f"{key}.a_th", "peak cost needs a_th > 0")


@dataclass
class AgentSpec:
    algorithm: str = "wait"
    z_max: float = 5.0
    x_min: float = 2.0
    x_max: float = 10.0
    alpha_theta: float = 1e-4
    alpha_omega: float = 1e-3
    sigma: float = 0.5
    d: int = 10
    n: int = 10
    y_max: float = 10.0
    d1: int = 10
    d2: int = 10
    yb_max: float = 10.0
    table: dict | None = None

    def resolve(self, key: str) -> None:
        _check(self.algorithm in AGENT_KINDS, f"{key}.algorithm",
               f"unknown algorithm {self.algorithm!r}; choose from {list(AGENT_KINDS)}")
        _check(self.z_max > 0, f"{key}.z_max", "must be > 0")
        _check(0 <= self.x_min < self.x_max, f"{key}.x_min", "need 0 <= x_min < x_max")
        _check(self.y_max > 0, f"{key}.y_max", "must be > 0")
        _check(self.x_max <= self.y_max, f"{key}.x_max", "must not exceed y_max")
        _check(self.yb_max > 0, f"{key}.yb_max", "must be > 0")
        _check(self.sigma > 0, f"{key}.sigma", "must be > 0")
        _check(self.alpha_theta >= 0, f"{key}.alpha_theta", "must be >= 0")
        _check(self.alpha_omega >= 0, f"{key}.alpha_omega", "must be >= 0")
        for name in ("d", "n", "d1", "d2"):
            _check(int(getattr(self, name)) >= 1, f"{key}.{name}", "must be >= 1")
        if self.algorithm == "fixed":
            _check(bool(self.table), f"{key}.table", "fixed policy needs a table")
            clean = {}
            for state, zx in self.table.items():
                try:
                    z, x = (float(v) for v in zx)
                    clean[float(state)] = [z, x]
                except (TypeError, ValueError):
                    raise ConfigError(f"{key}.table.{state}", "entries must be [z, x] pairs") from None
            self.table = clean


@dataclass
class SweepSpec:
    axis: str
    values: list

    def resolve(self, key: str) -> None:
        _check(isinstance(self.axis, str) and self.axis.count(".") >= 1, f"{key}.axis",
               "must be a dotted path such as 'channel.rho'")
        _check(isinstance(self.values, list) and len(self.values) > 0, f"{key}.values",
               "must be a non-empty list")


@dataclass
class SimSpec:
    horizon: float = 1e6
    max_steps: int = 100_000_000
    replications: int = 100
    master_seed: int = 0
    record_every: int = 100
    n_bins: int = 50
    two_way: ChannelSpec | None = None
    sweep: SweepSpec | None = None
    compare_oracle: bool = True

    def resolve(self, key: str) -> None:
        _check(self.horizon >= 0, f"{key}.horizon", "must be >= 0")
        _check(int(self.max_steps) >= 1, f"{key}.max_steps", "must be >= 1")
        _check(int(self.replications) >= 1, f"{key}.replications", "must be >= 1")
        _check(int(self.record_every) >= 1, f"{key}.record_every", "must be >= 1")
        _check(int(self.n_bins) >= 1, f"{key}.n_bins", "must be >= 1")
        if self.two_way is not None:
            self.two_way.resolve(f"{key}.two_way")
        if self.sweep is not None:
            self.sweep.resolve(f"{key}.sweep")


@dataclass
class ExperimentConfig:
    channel: ChannelSpec = field(default_factory=ChannelSpec)
    cost: CostSpec = field(default_factory=CostSpec)
    agent: AgentSpec = field(default_factory=AgentSpec)
    sim: SimSpec = field(default_factory=SimSpec)

    def resolve(self) -> "ExperimentConfig":
        self.channel.resolve("channel")
        self.cost.resolve("cost")
        self.agent.resolve("agent")
        self.sim.resolve("sim")
        return self

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ConfigError("<root>", "config must be a JSON object")
        unknown = set(data) - {"channel", "cost", "agent", "sim"}
        if unknown:
            raise ConfigError(sorted(unknown)[0], "unknown section")
        sim = dict(data.get("sim") or {})
        if sim.get("two_way") is not None:
            sim["two_way"] = _build(ChannelSpec, sim["two_way"], "sim.two_way")
        if sim.get("sweep") is not None:
            sim["sweep"] = _build(SweepSpec, sim["sweep"], "sim.sweep")
        cfg = cls(
            channel=_build(ChannelSpec, data.get("channel") or {}, "channel"),
            cost=_build(CostSpec, data.get("cost") or {}, "cost"),
            agent=_build(AgentSpec, data.get("agent") or {}, "agent"),
            sim=_build(SimSpec, sim, "sim"),
        )
        return cfg.resolve()

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, default=str)
        return hashlib.sha256(blob.encode()).hexdigest()[:12]

    def with_value(self, path: str, value) -> "ExperimentConfig":
        """Copy with one dotted-path entry replaced, re-resolved.

        Setting ``channel.rho`` clears ``eta`` (and vice versa) so the label
        drives the AR coefficient.
        """
        data = self.to_dict()
        parts = path.split(".")
        node = data
        for p in parts[:-1]:
            if not isinstance(node, dict) or p not in node or node[p] is None:
                raise ConfigError(path, "no such config entry")
            node = node[p]
        if not isinstance(node, dict) or parts[-1] not in node:
            raise ConfigError(path, "no such config entry")
        node[parts[-1]] = value
        if parts[-1] == "rho" and "eta" in node:
            node["eta"] = None
        elif parts[-1] == "eta" and "rho" in node:
            node["rho"] = None
        data["sim"]["sweep"] = None
        return ExperimentConfig.from_dict(data)


def _check(ok: bool, key: str, message: str) -> None:
    if not ok:
        raise ConfigError(key, message)


def _build(cls, raw, key):
    if not isinstance(raw, dict):
        raise ConfigError(key, "must be an object")
    names = {f.name: f for f in dataclasses.fields(cls)}
    unknown = set(raw) - set(names)
    if unknown:
        raise ConfigError(f"{key}.{sorted(unknown)[0]}", "unknown key")
    kwargs = {}
    for name, value in raw.items():
        if name in ("two_way", "sweep", "table", "values", "state") or value is None:
            kwargs[name] = value
            continue
        default = names[name].default
        try:
            if isinstance(default, bool):
                if not isinstance(value, bool):
                    raise TypeError
                kwargs[name] = value
            elif isinstance(default, int) and not isinstance(default, bool):
                if isinstance(value, bool) or float(value) != int(float(value)):
                    raise TypeError
                kwargs[name] = int(float(value))
            elif isinstance(default, float) or default is None:
                if isinstance(value, (bool, str)):
                    raise TypeError
                kwargs[name] = float(value)
            else:
                if not isinstance(value, str):
                    raise TypeError
                kwargs[name] = value
        except (TypeError, ValueError):
            raise ConfigError(f"{key}.{name}", f"bad value {value!r}") from None
        if isinstance(kwargs[name], float) and math.isnan(kwargs[name]):
            raise ConfigError(f"{key}.{name}", "NaN not allowed")
    return cls(**kwargs)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError("config", f"file not found: {path}")
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError("config", f"{path}: invalid JSON ({exc})") from None
    return ExperimentConfig.from_dict(data)


def copy_config(cfg: ExperimentConfig) -> ExperimentConfig:
    return copy.deepcopy(cfg)
