"""Scenario generation and timeline runs.

Channels combine a log-distance path loss with Rayleigh fading over a cluster
of hexagonal cells; renewable harvests come from a CSV file or a synthetic
solar/wind generator. :func:`run_timeline` solves every block with the
requested schemes and collects per-BS results.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Iterable

import numpy as np

from .baselines import conventional_optimal, conventional_zf
from .duality import recover_schedule, solve_joint
from .model import (ChannelSet, ClusterConfig, InfeasibleError, NotConvergedError,
                    ProblemInstance, SolveOutcome, SolverError, consumption_all, per_bs_power,
                    total_cost)
from .options import SolverOptions
from .zf import solve_zf

log = logging.getLogger(__name__)

SCHEMES: dict[str, Callable[[ProblemInstance, SolverOptions], SolveOutcome]] = {
    "optimal": solve_joint,
    "zf": solve_zf,
    "conv-optimal": conventional_optimal,
    "conv-zf": conventional_zf,
}
POLICIES = ("skip", "error", "record-infeasible")
CHANNEL_MODES = ("per-block", "fixed-set")


def dbm_to_watt(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


@dataclass(frozen=True)
class LayoutSpec:
    """Hexagonal cluster geometry and the path-loss law
    ``PL(dB) = intercept + slope * log10(d / 1 km)``."""

    inter_bs_distance: float = 1000.0
    seed: int = 0
    pl_intercept_db: float = 128.1
    pl_slope_db: float = 37.6
    min_distance: float = 35.0

    def __post_init__(self):
        if not self.inter_bs_distance > 0:
            raise ValueError("inter_bs_distance must be positive")
        if not self.min_distance > 0:
            raise ValueError("min_distance must be positive")


def bs_positions(n_bs: int, inter_bs_distance: float) -> np.ndarray:
    """Centres of ``n_bs`` mutually close cells of a hexagonal lattice.

    Lattice sites are ranked by distance from the centroid of the first
    triangle of neighbouring sites, then by angle, which yields a line for two
    cells, a triangle for three and a compact blob beyond.
    """
    d = inter_bs_distance
    a = np.array([d, 0.0])
    b = np.array([d / 2.0, d * math.sqrt(3.0) / 2.0])
    r = int(math.ceil(math.sqrt(n_bs))) + 2
    pts = np.array([i * a + j * b for i in range(-r, r + 1) for j in range(-r, r + 1)])
    ref = (a + b) / 3.0
    rel = pts - ref
    dist = np.round(np.hypot(rel[:, 0], rel[:, 1]) / d, 9)
    ang = np.mod(np.arctan2(rel[:, 1], rel[:, 0]), 2 * np.pi)
    order = np.lexsort((np.round(ang, 9), dist))
    return pts[order[:n_bs]]


def _in_hexagon(xy: np.ndarray, inter_bs_distance: float) -> np.ndarray:
    # cell faces are normal to the three lattice directions, at half the BS spacing
    half = inter_bs_distance / 2.0
    inside = np.ones(len(xy), dtype=bool)
    for theta in (0.0, np.pi / 3.0, 2.0 * np.pi / 3.0):
        inside &= np.abs(xy[:, 0] * np.cos(theta) + xy[:, 1] * np.sin(theta)) <= half
    return inside


def mt_positions(rng: np.random.Generator, n_mt: int, centres: np.ndarray,
                 inter_bs_distance: float) -> np.ndarray:
    """Uniform positions over the union of the cells (equal-area cells, so pick
    a cell uniformly, then a point in it by rejection)."""
    cells = rng.integers(0, len(centres), size=n_mt)
    out = np.empty((n_mt, 2))
    circ = inter_bs_distance / math.sqrt(3.0)
    for m in range(n_mt):
        while True:
            p = rng.uniform(-circ, circ, size=(1, 2))
            if _in_hexagon(p, inter_bs_distance)[0]:
                break
        out[m] = centres[cells[m]] + p[0]
    return out


def channel_gain(distance, layout: LayoutSpec):
    """Mean power gain at ``distance`` metres (clamped below at ``min_distance``)."""
    d_km = np.maximum(np.asarray(distance, dtype=float), layout.min_distance) / 1000.0
    return 10.0 ** (-(layout.pl_intercept_db + layout.pl_slope_db * np.log10(d_km)) / 10.0)


def small_scale_fading(rng: np.random.Generator, shape) -> np.ndarray:
    """Circularly-symmetric complex Gaussian entries with unit variance."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2.0)


def generate_channels(layout: LayoutSpec, cluster: ClusterConfig, block_seed: int) -> ChannelSet:
    """MT positions and fading for one realization, drawn from a generator
    seeded with ``(layout.seed, block_seed)``."""
    rng = np.random.default_rng([layout.seed, block_seed])
    centres = bs_positions(cluster.n_bs, layout.inter_bs_distance)
    mts = mt_positions(rng, cluster.n_mt, centres, layout.inter_bs_distance)
    dist = np.hypot(mts[None, :, 0] - centres[:, None, 0], mts[None, :, 1] - centres[:, None, 1])
    amp = np.sqrt(channel_gain(dist, layout))  # (N, K)
    g = small_scale_fading(rng, (cluster.n_bs, cluster.n_ant, cluster.n_mt))
    h = (amp[:, None, :] * g).reshape(cluster.n_tx, cluster.n_mt)
    return ChannelSet(h, cluster.n_ant)


# -- renewable series ---------------------------------------------------------

@dataclass(frozen=True)
class RenewableSeries:
    """Harvested energy per block; ``energy[t, i]`` belongs to ``blocks[t]``
    and BS ``i``."""

    blocks: np.ndarray
    energy: np.ndarray

    def __post_init__(self):
        blocks = np.array(self.blocks, dtype=np.int64)
        energy = np.array(self.energy, dtype=float)
        if energy.ndim != 2 or blocks.shape != (energy.shape[0],):
            raise ValueError("energy must be (blocks, n_bs) with one block index per row")
        if blocks.size == 0:
            raise ValueError("no samples")
        if np.any(np.diff(blocks) <= 0):
            raise ValueError("block indices must be strictly increasing")
        if np.any(~np.isfinite(energy)) or np.any(energy < 0):
            raise ValueError("harvested energy must be finite and non-negative")
        blocks.setflags(write=False)
        energy.setflags(write=False)
        object.__setattr__(self, "blocks", blocks)
        object.__setattr__(self, "energy", energy)

    @property
    def n_bs(self) -> int:
        return self.energy.shape[1]

    def __len__(self) -> int:
        return len(self.blocks)


CSV_HEADER = ["block", "bs_id", "energy"]


def load_renewable_csv(path, n_bs: int | None = None) -> RenewableSeries:
    """Parse a ``block,bs_id,energy`` file.

    Every block must list every BS exactly once. Errors name the offending
    line.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as f:
        return parse_renewable_csv(f, n_bs, str(path))


def parse_renewable_csv(stream, n_bs: int | None = None, name: str = "<stream>") -> RenewableSeries:
    reader = csv.reader(stream)
    header = next(reader, None)
    if header is None or [c.strip() for c in header] != CSV_HEADER:
        raise ValueError(f"{name}:1: expected header {','.join(CSV_HEADER)}, got {header}")
    samples: dict[int, dict[int, float]] = {}
    for row in reader:
        line = reader.line_num
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 3:
            raise ValueError(f"{name}:{line}: expected 3 fields, got {len(row)}")
        try:
            block, bs, energy = int(row[0]), int(row[1]), float(row[2])
        except ValueError as exc:
            raise ValueError(f"{name}:{line}: malformed row {row}: {exc}") from None
        if block < 0:
            raise ValueError(f"{name}:{line}: negative block index {block}")
        if bs < 0 or (n_bs is not None and bs >= n_bs):
            raise ValueError(f"{name}:{line}: bs_id {bs} outside the cluster")
        if not math.isfinite(energy) or energy < 0:
            raise ValueError(f"{name}:{line}: energy must be non-negative, got {row[2]}")
        per_block = samples.setdefault(block, {})
        if bs in per_block:
            raise ValueError(f"{name}:{line}: duplicate sample for block {block}, bs_id {bs}")
        per_block[bs] = energy
    if not samples:
        raise ValueError(f"{name}: no samples")
    width = n_bs if n_bs is not None else 1 + max(max(d) for d in samples.values())
    blocks = sorted(samples)
    energy = np.empty((len(blocks), width))
    for t, b in enumerate(blocks):
        missing = sorted(set(range(width)) - set(samples[b]))
        if missing:
            raise ValueError(f"{name}: block {b} has no sample for bs_id {missing[0]}")
        energy[t] = [samples[b][i] for i in range(width)]
    return RenewableSeries(np.array(blocks), energy)


def write_renewable_csv(series: RenewableSeries, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as f:
        f.write(format_renewable_csv(series))


def format_renewable_csv(series: RenewableSeries) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for t, b in enumerate(series.blocks):
        for i in range(series.n_bs):
            w.writerow([int(b), i, repr(float(series.energy[t, i]))])
    return buf.getvalue()


def synthetic_renewables(n_bs: int, n_blocks: int, seed: int = 0, peak: float = 1000.0,
                         blocks_per_day: int = 96, sources=None) -> RenewableSeries:
    """Synthetic harvests: a solar half-sine day cycle and a positive
    mean-reverting wind process.

    ``sources[i]`` is ``"solar"``, ``"wind"`` or ``"both"``; by default the
    BSs cycle through solar, wind, both. Solar peaks at ``peak`` at midday and
    is zero at night; wind is a logistic transform of an Ornstein-Uhlenbeck
    path scaled to ``[0, peak]``.
    """
    if n_bs < 1 or n_blocks < 1:
        raise ValueError("n_bs and n_blocks must be positive")
    if sources is None:
        sources = [("solar", "wind", "both")[i % 3] for i in range(n_bs)]
    if len(sources) != n_bs:
        raise ValueError("need one source per BS")
    rng = np.random.default_rng(seed)
    t = np.arange(n_blocks)
    phase = (t % blocks_per_day) / blocks_per_day  # 0 = midnight
    solar = peak * np.clip(np.sin(2 * np.pi * (phase - 0.25)), 0.0, None)
    energy = np.empty((n_blocks, n_bs))
    theta, sigma = 4.0 / blocks_per_day, math.sqrt(8.0 / blocks_per_day)
    for i, src in enumerate(sources):
        x = np.empty(n_blocks)
        x[0] = rng.standard_normal()
        for s in range(1, n_blocks):
            x[s] = x[s - 1] - theta * x[s - 1] + sigma * rng.standard_normal()
        wind = peak / (1.0 + np.exp(-1.5 * x))
        if src == "solar":
            energy[:, i] = solar
        elif src == "wind":
            energy[:, i] = wind
        elif src == "both":
            energy[:, i] = 0.5 * (solar + wind)
        else:
            raise ValueError(f"unknown renewable source {src!r}")
    return RenewableSeries(t, energy)


# -- timeline -----------------------------------------------------------------

@dataclass(frozen=True)
class BlockResult:
    block: int
    scheme: str
    feasible: bool
    tx_power: np.ndarray | None = None
    consumption: np.ndarray | None = None
    buy: np.ndarray | None = None
    sell: np.ndarray | None = None
    cost: float = float("nan")
    realization: int = 0
    message: str = ""


@dataclass
class TimelineReport:
    """Results per (block, scheme, realization), in solve order."""

    schemes: tuple
    results: list = field(default_factory=list)

    def rows(self, scheme: str) -> list:
        return [r for r in self.results if r.scheme == scheme]

    def block_costs(self, scheme: str) -> dict:
        """Mean cost per block over the feasible realizations."""
        acc: dict[int, list] = {}
        for r in self.rows(scheme):
            if r.feasible:
                acc.setdefault(r.block, []).append(r.cost)
        return {b: float(np.mean(v)) for b, v in sorted(acc.items())}

    def mean_cost(self, scheme: str) -> float:
        costs = [r.cost for r in self.rows(scheme) if r.feasible]
        return float(np.mean(costs)) if costs else float("nan")

    def blocks_feasible(self, scheme: str) -> int:
        return len({r.block for r in self.rows(scheme) if r.feasible})

    def report_csv(self) -> str:
        """``block,scheme,bs_id,tx_power,consumption,buy,sell``; per-BS values
        are averaged over the realizations of a block."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["block", "scheme", "bs_id", "tx_power", "consumption", "buy", "sell"])
        for scheme in self.schemes:
            grouped: dict[int, list] = {}
            for r in self.rows(scheme):
                if r.feasible:
                    grouped.setdefault(r.block, []).append(r)
            for b in sorted(grouped):
                rs = grouped[b]
                cols = [np.mean([getattr(r, name) for r in rs], axis=0)
                        for name in ("tx_power", "consumption", "buy", "sell")]
                for i in range(len(cols[0])):
                    w.writerow([b, scheme, i] + [f"{c[i]:.12g}" for c in cols])
        return buf.getvalue()

    def summary_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["scheme", "mean_cost", "blocks_feasible"])
        for scheme in self.schemes:
            w.writerow([scheme, f"{self.mean_cost(scheme):.12g}", self.blocks_feasible(scheme)])
        return buf.getvalue()

    def write(self, out_dir) -> tuple[Path, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        report, summary = out / "report.csv", out / "summary.csv"
        report.write_text(self.report_csv(), encoding="utf-8")
        summary.write_text(self.summary_csv(), encoding="utf-8")
        return report, summary


def _result(block, scheme, instance, outcome, realization):
    c = instance.cluster
    return BlockResult(block, scheme, True,
                       per_bs_power(outcome.beams, c.n_ant), consumption_all(outcome.beams, c),
                       np.asarray(outcome.schedule.buy), np.asarray(outcome.schedule.sell),
                       total_cost(outcome.schedule, instance.energy), realization)


def run_timeline(template: ProblemInstance, series: RenewableSeries,
                 schemes: Iterable[str] = tuple(SCHEMES), *,
                 layout: LayoutSpec | None = None, channel_mode: str = "fixed-set",
                 n_realizations: int = 1, policy: str = "skip",
                 options: SolverOptions | None = None, cache_conventional: bool = True
                 ) -> TimelineReport:
    """Solve every block of ``series`` with each scheme.

    Channels come from ``layout`` when given (otherwise the template's channels
    are used for every block). In ``fixed-set`` mode the same
    ``n_realizations`` channel sets serve every block; in ``per-block`` mode
    block ``b`` uses realization seeds ``b * n_realizations + r``.

    ``policy`` decides what happens when some scheme fails on a
    (block, realization): ``skip`` drops that pair for every scheme (mutual
    feasibility), ``error`` re-raises, ``record-infeasible`` keeps the
    successful schemes and marks the failing ones infeasible.

    Conventional beams ignore prices and harvests, so with fixed channels
    their solutions are computed once per realization and re-traded per block
    unless ``cache_conventional`` is off.
    """
    schemes = tuple(schemes)
    unknown = [s for s in schemes if s not in SCHEMES]
    if unknown:
        raise ValueError(f"unknown scheme(s): {', '.join(unknown)}")
    if policy not in POLICIES:
        raise ValueError(f"policy must be one of {', '.join(POLICIES)}")
    if channel_mode not in CHANNEL_MODES:
        raise ValueError(f"channel_mode must be one of {', '.join(CHANNEL_MODES)}")
    if n_realizations < 1:
        raise ValueError("n_realizations must be positive")
    if series.n_bs != template.n_bs:
        raise ValueError(f"series has {series.n_bs} BSs, cluster has {template.n_bs}")
    opts = options or SolverOptions()
    fixed = layout is None or channel_mode == "fixed-set"
    cache: dict[tuple[str, int], object] = {}

    def channels_for(block_pos, r):
        if layout is None:
            return template.channels
        seed = r if channel_mode == "fixed-set" else block_pos * n_realizations + r
        return generate_channels(layout, template.cluster, seed)

    fixed_channels = {}
    report = TimelineReport(schemes)
    for t, block in enumerate(series.blocks):
        base = template.with_harvest(series.energy[t])
        for r in range(n_realizations):
            if fixed:
                if r not in fixed_channels:
                    fixed_channels[r] = channels_for(t, r)
                channels = fixed_channels[r]
            else:
                channels = channels_for(t, r)
            inst = ProblemInstance(base.cluster, base.energy, channels, base.qos)
            row, failed = [], False
            for scheme in schemes:
                key = (scheme, r)
                try:
                    if scheme.startswith("conv") and fixed and cache_conventional:
                        if key not in cache:
                            try:
                                cache[key] = SCHEMES[scheme](inst, opts)
                            except SolverError as exc:
                                cache[key] = exc
                        hit = cache[key]
                        if isinstance(hit, SolverError):
                            raise hit
                        outcome = _retrade(hit, inst)
                    else:
                        outcome = SCHEMES[scheme](inst, opts)
                    if not outcome.converged:
                        raise NotConvergedError(f"{scheme} did not converge", outcome)
                    row.append(_result(int(block), scheme, inst, outcome, r))
                except (InfeasibleError, NotConvergedError) as exc:
                    if policy == "error":
                        raise
                    failed = True
                    log.info("block %d realization %d: %s failed: %s", block, r, scheme, exc)
                    row.append(BlockResult(int(block), scheme, False, realization=r,
                                           message=str(exc)))
            if failed and policy == "skip":
                row = [BlockResult(int(block), x.scheme, False, realization=r,
                                   message=x.message or "skipped: another scheme failed")
                       for x in row]
            report.results.extend(row)
    return report


def _retrade(outcome: SolveOutcome, instance: ProblemInstance) -> SolveOutcome:
    """Same beams, schedule recomputed for this block's harvests and prices."""
    schedule = recover_schedule(outcome.beams, instance)
    return replace(outcome, schedule=schedule, cost=total_cost(schedule, instance.energy))
