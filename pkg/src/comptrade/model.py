"""Domain types and elementary evaluators for a CoMP cluster with two-way
energy trading.

Conventions:

* ``channels.h`` and ``beams.w`` are ``(M*N, K)`` complex arrays; column ``k``
  is the stacked vector for MT ``k`` and rows ``[i*M, (i+1)*M)`` belong to BS
  ``i``.
* One block is one time unit, so energy and power are interchangeable.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class SolverError(Exception):
    """Base class for solver failures."""


class InfeasibleError(SolverError):
    """The QoS targets cannot be met within the per-BS power caps."""

    def __init__(self, message, margin=float("nan")):
        super().__init__(message)
        self.margin = margin


class ZfInfeasibleError(InfeasibleError):
    """Zero-forcing is impossible for the given channels (K > MN or rank loss)."""


class NotConvergedError(SolverError):
    """An iterative routine exhausted its budget.

    ``last`` carries whatever the routine had when it stopped.
    """

    def __init__(self, message, last=None):
        super().__init__(message)
        self.last = last


def _frozen(values, dtype=float, ndim=1):
    arr = np.array(values, dtype=dtype, copy=True)
    if arr.ndim != ndim:
        raise ValueError(f"expected a {ndim}-d array, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class ClusterConfig:
    n_bs: int
    n_ant: int
    n_mt: int
    pa_efficiency: float
    p_max: np.ndarray
    p_circuit: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "p_max", _frozen(self.p_max))
        object.__setattr__(self, "p_circuit", _frozen(self.p_circuit))
        if self.n_bs < 1 or self.n_ant < 1 or self.n_mt < 1:
            raise ValueError("n_bs, n_ant and n_mt must be positive")
        if not 0.0 < self.pa_efficiency <= 1.0:
            raise ValueError("pa_efficiency must lie in (0, 1]")
        if self.p_max.shape != (self.n_bs,) or self.p_circuit.shape != (self.n_bs,):
            raise ValueError("p_max and p_circuit need one entry per BS")
        if np.any(self.p_max <= 0):
            raise ValueError("p_max entries must be positive")
        if np.any(self.p_circuit < 0):
            raise ValueError("p_circuit entries must be non-negative")

    @property
    def n_tx(self) -> int:
        """Total number of transmit antennas in the cluster (M*N)."""
        return self.n_ant * self.n_bs

    def block(self, i: int) -> slice:
        if not 0 <= i < self.n_bs:
            raise IndexError(f"BS index {i} out of range [0, {self.n_bs})")
        return slice(i * self.n_ant, (i + 1) * self.n_ant)


@dataclass(frozen=True)
class EnergyInputs:
    harvest: np.ndarray
    price_buy: np.ndarray
    price_sell: np.ndarray
    price_floor: float | None = None
    price_cap: float | None = None

    def __post_init__(self):
        for name in ("harvest", "price_buy", "price_sell"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        n = self.harvest.shape[0]
        if self.price_buy.shape != (n,) or self.price_sell.shape != (n,):
            raise ValueError("harvest and prices need one entry per BS")
        if self.price_floor is None:
            object.__setattr__(self, "price_floor", float(np.min(self.price_sell)))
        if self.price_cap is None:
            object.__setattr__(self, "price_cap", float(np.max(self.price_buy)))
        if np.any(self.harvest < 0):
            raise ValueError("harvested energy must be non-negative")
        if not self.price_floor > 0:
            raise ValueError("price_floor must be positive")
        if np.any(self.price_sell < self.price_floor) or np.any(self.price_sell > self.price_buy) \
                or np.any(self.price_buy > self.price_cap):
            raise ValueError("prices must satisfy floor <= sell <= buy <= cap for every BS")

    def with_harvest(self, harvest) -> EnergyInputs:
        return EnergyInputs(harvest, self.price_buy, self.price_sell, self.price_floor, self.price_cap)


@dataclass(frozen=True)
class ChannelSet:
    """Stacked cluster channels, ``h[:, k]`` being MT ``k``'s vector."""

    h: np.ndarray
    n_ant: int

    def __post_init__(self):
        object.__setattr__(self, "h", _frozen(self.h, dtype=complex, ndim=2))
        if self.h.shape[0] % self.n_ant:
            raise ValueError("channel length must be a multiple of n_ant")
        if not np.all(np.isfinite(self.h)):
            raise ValueError("channels must be finite")

    @property
    def n_mt(self) -> int:
        return self.h.shape[1]

    @property
    def n_tx(self) -> int:
        return self.h.shape[0]

    def sub_block(self, i: int, k: int) -> np.ndarray:
        """The M-length part of MT ``k``'s channel that comes from BS ``i``."""
        n_bs = self.n_tx // self.n_ant
        if not 0 <= i < n_bs:
            raise IndexError(f"BS index {i} out of range [0, {n_bs})")
        return self.h[i * self.n_ant:(i + 1) * self.n_ant, k]


@dataclass(frozen=True)
class QosTargets:
    sinr_min: np.ndarray
    noise_power: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "sinr_min", _frozen(self.sinr_min))
        object.__setattr__(self, "noise_power", _frozen(self.noise_power))
        if self.sinr_min.shape != self.noise_power.shape:
            raise ValueError("sinr_min and noise_power must have equal length")
        if np.any(self.sinr_min <= 0) or np.any(self.noise_power <= 0):
            raise ValueError("SINR targets and noise powers must be positive")


@dataclass(frozen=True)
class ProblemInstance:
    cluster: ClusterConfig
    energy: EnergyInputs
    channels: ChannelSet
    qos: QosTargets

    def __post_init__(self):
        c = self.cluster
        if self.energy.harvest.shape != (c.n_bs,):
            raise ValueError("energy inputs do not match n_bs")
        if self.channels.n_ant != c.n_ant or self.channels.h.shape != (c.n_tx, c.n_mt):
            raise ValueError(f"channels must have shape ({c.n_tx}, {c.n_mt})")
        if self.qos.sinr_min.shape != (c.n_mt,):
            raise ValueError("QoS targets do not match n_mt")

    @property
    def n_bs(self) -> int:
        return self.cluster.n_bs

    def with_harvest(self, harvest) -> ProblemInstance:
        return ProblemInstance(self.cluster, self.energy.with_harvest(harvest), self.channels, self.qos)

    def with_energy(self, energy: EnergyInputs) -> ProblemInstance:
        return ProblemInstance(self.cluster, energy, self.channels, self.qos)


@dataclass(frozen=True)
class BeamformingSolution:
    w: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "w", _frozen(self.w, dtype=complex, ndim=2))
        if not np.all(np.isfinite(self.w)):
            raise ValueError("beamformers must be finite")


@dataclass(frozen=True)
class EnergySchedule:
    buy: np.ndarray
    sell: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "buy", _frozen(self.buy))
        object.__setattr__(self, "sell", _frozen(self.sell))
        if np.any(self.buy < 0) or np.any(self.sell < 0):
            raise ValueError("traded energy must be non-negative")


@dataclass(frozen=True)
class SolveOutcome:
    """Result of one solver run.

    ``objective`` is the primal value of the problem whose dual was maximized:
    the energy cost for the joint schemes, the transmit sum-power for the
    conventional ones. ``dual_value`` is its certified lower bound.
    """

    beams: BeamformingSolution
    schedule: EnergySchedule
    cost: float
    dual_mu: np.ndarray
    dual_nu: np.ndarray
    dual_value: float
    iterations: int
    converged: bool
    objective: float = float("nan")
    scheme: str = ""
    log: tuple = field(default=(), repr=False)

    @property
    def duality_gap(self) -> float:
        return abs(self.objective - self.dual_value)

    @property
    def relative_gap(self) -> float:
        return self.duality_gap / max(1.0, abs(self.dual_value))


def per_bs_power(beams: BeamformingSolution, n_ant: int) -> np.ndarray:
    """Transmit power of every BS, summed over all MTs."""
    w = beams.w
    n_bs = w.shape[0] // n_ant
    return np.sum(np.abs(w.reshape(n_bs, n_ant, w.shape[1])) ** 2, axis=(1, 2))


def per_bs_tx_power(beams: BeamformingSolution, i: int, n_ant: int) -> float:
    n_bs = beams.w.shape[0] // n_ant
    if not 0 <= i < n_bs:
        raise IndexError(f"BS index {i} out of range [0, {n_bs})")
    blk = beams.w[i * n_ant:(i + 1) * n_ant, :]
    return float(np.sum(np.abs(blk) ** 2))


def sinr_all(beams: BeamformingSolution, channels: ChannelSet, qos: QosTargets) -> np.ndarray:
    g = np.abs(channels.h.conj().T @ beams.w) ** 2  # g[k, l] = |h_k^H w_l|^2
    signal = np.diag(g)
    interference = g.sum(axis=1) - signal
    return signal / (interference + qos.noise_power)


def sinr(beams: BeamformingSolution, channels: ChannelSet, qos: QosTargets, k: int) -> float:
    if not 0 <= k < channels.n_mt:
        raise IndexError(f"MT index {k} out of range [0, {channels.n_mt})")
    return float(sinr_all(beams, channels, qos)[k])


def total_cost(schedule: EnergySchedule, energy: EnergyInputs) -> float:
    return float(np.dot(energy.price_buy, schedule.buy) - np.dot(energy.price_sell, schedule.sell))


def consumption_all(beams: BeamformingSolution, cluster: ClusterConfig) -> np.ndarray:
    return per_bs_power(beams, cluster.n_ant) / cluster.pa_efficiency + cluster.p_circuit


def consumption(beams: BeamformingSolution, cluster: ClusterConfig, i: int) -> float:
    """Total power drawn by BS ``i``: PA input power plus circuit power."""
    p = per_bs_tx_power(beams, i, cluster.n_ant)
    return p / cluster.pa_efficiency + float(cluster.p_circuit[i])
