"""JSON configuration files.

Sections mirror the domain types::

    {
      "cluster":  {"n_bs", "n_ant", "n_mt", "pa_efficiency", "p_max", "p_circuit"},
      "energy":   {"harvest", "price_buy", "price_sell", ["price_floor"], ["price_cap"]},
      "qos":      {"sinr_min", "noise_power"},
      "channels": [[[re, im], ...], ...]   # K lists of M*N entries
      "layout":   {...}                    # instead of "channels"
      "solver":   {...}                    # SolverOptions fields
      "simulation": {...}                  # SimulationSpec fields
    }

Per-BS and per-MT lists may be given as a single number, which is repeated.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .model import ChannelSet, ClusterConfig, EnergyInputs, ProblemInstance, QosTargets
from .options import SolverOptions
from .scenario import CHANNEL_MODES, POLICIES, SCHEMES, LayoutSpec, generate_channels


class ConfigError(ValueError):
    """Invalid configuration; the message names the file and location."""


@dataclass(frozen=True)
class SimulationSpec:
    blocks: int = 24
    renewables: str = "synthetic"
    renewable_peak: float = 1000.0
    blocks_per_day: int = 96
    sources: tuple | None = None
    seed: int = 0
    channel_mode: str = "fixed-set"
    n_realizations: int = 1
    policy: str = "skip"
    schemes: tuple = tuple(SCHEMES)

    def __post_init__(self):
        if self.blocks < 1 or self.n_realizations < 1 or self.blocks_per_day < 1:
            raise ValueError("blocks, blocks_per_day and n_realizations must be positive")
        if self.channel_mode not in CHANNEL_MODES:
            raise ValueError(f"channel_mode must be one of {', '.join(CHANNEL_MODES)}")
        if self.policy not in POLICIES:
            raise ValueError(f"policy must be one of {', '.join(POLICIES)}")
        object.__setattr__(self, "schemes", tuple(self.schemes))
        bad = [s for s in self.schemes if s not in SCHEMES]
        if bad:
            raise ValueError(f"unknown scheme(s): {', '.join(bad)}")
        if self.sources is not None:
            object.__setattr__(self, "sources", tuple(self.sources))


@dataclass(frozen=True)
class Config:
    cluster: ClusterConfig
    energy: EnergyInputs
    qos: QosTargets
    channels: ChannelSet | None = None
    layout: LayoutSpec | None = None
    solver: SolverOptions = field(default_factory=SolverOptions)
    simulation: SimulationSpec = field(default_factory=SimulationSpec)

    def __post_init__(self):
        if (self.channels is None) == (self.layout is None):
            raise ValueError("give exactly one of 'channels' and 'layout'")

    def instance(self, realization: int = 0) -> ProblemInstance:
        """The problem instance; layout-based configs draw realization
        ``realization`` of the channels."""
        channels = self.channels
        if channels is None:
            channels = generate_channels(self.layout, self.cluster, realization)
        return ProblemInstance(self.cluster, self.energy, channels, self.qos)


def _expand(value, n, name):
    arr = np.atleast_1d(np.asarray(value, dtype=float))
    if arr.ndim != 1:
        raise ValueError(f"{name} must be a number or a list of numbers")
    if arr.size == 1 and n != 1:
        arr = np.full(n, arr[0])
    if arr.size != n:
        raise ValueError(f"{name} needs {n} entries, got {arr.size}")
    return arr


def _take(section: dict, where: str, allowed) -> dict:
    if not isinstance(section, dict):
        raise ValueError(f"'{where}' must be an object")
    unknown = sorted(set(section) - set(allowed))
    if unknown:
        raise ValueError(f"unknown key(s) in '{where}': {', '.join(unknown)}")
    return section


def _parse_channels(raw, cluster: ClusterConfig) -> ChannelSet:
    if not isinstance(raw, list) or len(raw) != cluster.n_mt:
        raise ValueError(f"'channels' must list {cluster.n_mt} vectors (one per MT)")
    cols = []
    for k, vec in enumerate(raw):
        arr = np.asarray(vec, dtype=float)
        if arr.shape != (cluster.n_tx, 2):
            raise ValueError(f"channels[{k}] must hold {cluster.n_tx} [re, im] pairs")
        cols.append(arr[:, 0] + 1j * arr[:, 1])
    return ChannelSet(np.stack(cols, axis=1), cluster.n_ant)


def from_dict(data: dict) -> Config:
    """Build a :class:`Config`; raises :class:`ConfigError` naming the
    offending section."""
    section = "top level"
    try:
        _take(data, section, ("cluster", "energy", "qos", "channels", "layout", "solver",
                              "simulation"))
        for required in ("cluster", "energy", "qos"):
            if required not in data:
                raise ValueError(f"missing section '{required}'")
        section = "cluster"
        c = _take(data["cluster"], section, [f.name for f in fields(ClusterConfig)])
        n = int(c["n_bs"])
        cluster = ClusterConfig(n, int(c["n_ant"]), int(c["n_mt"]), float(c["pa_efficiency"]),
                                _expand(c["p_max"], n, "p_max"),
                                _expand(c.get("p_circuit", 0.0), n, "p_circuit"))
        section = "energy"
        e = _take(data["energy"], section, [f.name for f in fields(EnergyInputs)])
        energy = EnergyInputs(_expand(e["harvest"], n, "harvest"),
                              _expand(e["price_buy"], n, "price_buy"),
                              _expand(e["price_sell"], n, "price_sell"),
                              e.get("price_floor"), e.get("price_cap"))
        section = "qos"
        q = _take(data["qos"], section, ("sinr_min", "noise_power"))
        k = cluster.n_mt
        qos = QosTargets(_expand(q["sinr_min"], k, "sinr_min"),
                         _expand(q["noise_power"], k, "noise_power"))
        channels = layout = None
        if "channels" in data:
            section = "channels"
            channels = _parse_channels(data["channels"], cluster)
        if "layout" in data:
            section = "layout"
            layout = LayoutSpec(**_take(data["layout"], section,
                                        [f.name for f in fields(LayoutSpec)]))
        section = "solver"
        solver = SolverOptions(**_take(data.get("solver", {}), section,
                                       [f.name for f in fields(SolverOptions)]))
        section = "simulation"
        simulation = SimulationSpec(**_take(data.get("simulation", {}), section,
                                            [f.name for f in fields(SimulationSpec)]))
        section = "top level"
        return Config(cluster, energy, qos, channels, layout, solver, simulation)
    except KeyError as exc:
        raise ConfigError(f"missing key {exc} in '{section}'") from None
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"in '{section}': {exc}") from None


def _floats(arr) -> list:
    return [float(x) for x in arr]


def to_dict(config: Config) -> dict:
    c, e, q = config.cluster, config.energy, config.qos
    out = {
        "cluster": {"n_bs": c.n_bs, "n_ant": c.n_ant, "n_mt": c.n_mt,
                    "pa_efficiency": c.pa_efficiency, "p_max": _floats(c.p_max),
                    "p_circuit": _floats(c.p_circuit)},
        "energy": {"harvest": _floats(e.harvest), "price_buy": _floats(e.price_buy),
                   "price_sell": _floats(e.price_sell), "price_floor": e.price_floor,
                   "price_cap": e.price_cap},
        "qos": {"sinr_min": _floats(q.sinr_min), "noise_power": _floats(q.noise_power)},
    }
    if config.channels is not None:
        h = config.channels.h
        out["channels"] = [[[float(z.real), float(z.imag)] for z in h[:, k]]
                           for k in range(h.shape[1])]
    else:
        out["layout"] = asdict(config.layout)
    out["solver"] = asdict(config.solver)
    sim = asdict(config.simulation)
    sim["schemes"] = list(sim["schemes"])
    if sim["sources"] is not None:
        sim["sources"] = list(sim["sources"])
    out["simulation"] = sim
    return out


def loads(text: str, name: str = "<config>") -> Config:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{name}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}") from None
    try:
        return from_dict(data)
    except ConfigError as exc:
        raise ConfigError(f"{name}: {exc}") from None


def load(path) -> Config:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    return loads(text, str(path))


def dumps(config: Config) -> str:
    return json.dumps(to_dict(config), indent=2) + "\n"


def save(config: Config, path) -> None:
    Path(path).write_text(dumps(config), encoding="utf-8")
