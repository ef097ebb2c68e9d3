"""Slow, independent reference computations for tests and the ``verify``
command."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .duality import WeightedNoise, dual_oracle, recover_schedule
from .model import (BeamformingSolution, InfeasibleError, ProblemInstance, per_bs_power,
                    total_cost)
from .options import SolverOptions
from .zf import null_space_bases, zf_dual_oracle


@dataclass(frozen=True)
class GridResult:
    powers: np.ndarray
    cost: float


def _energy_cost(consumption, instance: ProblemInstance):
    e = instance.energy
    net = consumption - e.harvest
    return (np.maximum(net, 0.0) @ e.price_buy) - (np.maximum(-net, 0.0) @ e.price_sell)


def grid_search_two_bs(instance: ProblemInstance, grid_step: float,
                       chunk: int = 1 << 16) -> GridResult:
    """Cheapest grid point ``(P_1, P_2)`` meeting the SNR target of a single
    MT served by two single-antenna BSs.

    Beam phases are set for coherent combining, so the SNR is
    ``(|h_1| sqrt(P_1) + |h_2| sqrt(P_2))^2 / sigma^2``. The cost grows with
    each power, so for every grid value of ``P_1`` only the smallest feasible
    grid value of ``P_2`` can win; scanning those is the same as scanning the
    full grid. The grid covers ``[0, P_max,i]`` in steps of ``grid_step``.
    """
    c = instance.cluster
    if (c.n_bs, c.n_ant, c.n_mt) != (2, 1, 1):
        raise ValueError("grid search needs N=2, M=1, K=1, "
                         f"got N={c.n_bs}, M={c.n_ant}, K={c.n_mt}")
    if not grid_step > 0:
        raise ValueError("grid_step must be positive")
    a1, a2 = np.abs(instance.channels.h[:, 0])
    need = np.sqrt(instance.qos.sinr_min[0] * instance.qos.noise_power[0])
    n1 = int(np.floor(c.p_max[0] / grid_step + 1e-9)) + 1
    n2max = int(np.floor(c.p_max[1] / grid_step + 1e-9))
    best_cost, best = np.inf, None
    for start in range(0, n1, chunk):
        p1 = grid_step * np.arange(start, min(n1, start + chunk))
        short = np.maximum(need - a1 * np.sqrt(p1), 0.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            p2_min = np.where(short > 0, (short / a2) ** 2 if a2 > 0 else np.inf, 0.0)
        # smallest grid index meeting the target; guard against round-off
        j = np.ceil(p2_min / grid_step * (1.0 - 1e-12))
        ok = j <= n2max
        if not np.any(ok):
            continue
        p1, p2 = p1[ok], grid_step * j[ok]
        cons = np.stack([p1, p2], axis=1) / c.pa_efficiency + c.p_circuit
        cost = _energy_cost(cons, instance)
        k = int(np.argmin(cost))
        if cost[k] < best_cost:
            best_cost, best = float(cost[k]), np.array([p1[k], p2[k]])
    if best is None:
        raise InfeasibleError("no grid point meets the SNR target within the power caps")
    return GridResult(best, best_cost)


@dataclass(frozen=True)
class SingleUserReference:
    lam: float
    receiver: np.ndarray
    power: float
    beams: BeamformingSolution
    dual_value: float
    cost: float


def single_user_closed_forms(instance: ProblemInstance, mu, nu) -> SingleUserReference:
    """Every inner quantity of the joint solver for one MT, in closed form.

    With one MT the uplink fixed point collapses (Sherman-Morrison) to
    ``lam = gamma / (h^H B^{-1} h)``, the MMSE receiver to the normalized
    ``B^{-1} h`` and the downlink power to ``gamma sigma^2 / |h^H u|^2``.
    ``cost`` is the energy cost of these beams after trading.
    """
    c = instance.cluster
    if c.n_mt != 1:
        raise ValueError(f"single-user formulas need K=1, got K={c.n_mt}")
    mu = np.asarray(mu, dtype=float)
    nu = np.asarray(nu, dtype=float)
    b = WeightedNoise.from_duals(mu, nu, c.pa_efficiency).diagonal(c.n_ant)
    h = instance.channels.h[:, 0]
    gamma = float(instance.qos.sinr_min[0])
    sigma2 = float(instance.qos.noise_power[0])
    x = h / b
    q = float(np.real(np.vdot(h, x)))
    u = x / np.linalg.norm(x)
    p = gamma * sigma2 / abs(np.vdot(h, u)) ** 2
    beams = BeamformingSolution((np.sqrt(p) * u)[:, None])
    pt = per_bs_power(beams, c.n_ant)
    value = float(mu @ (pt / c.pa_efficiency + c.p_circuit - instance.energy.harvest)
                  + nu @ (pt - c.p_max))
    cost = total_cost(recover_schedule(beams, instance), instance.energy)
    return SingleUserReference(gamma / q, u, p, beams, value, cost)


def finite_diff_subgradient_check(instance: ProblemInstance, point, h_step: float = 1e-5,
                                  zf: bool = False, options: SolverOptions | None = None
                                  ) -> float:
    """Largest gap between the oracle's supergradient and central differences
    of the dual value, relative to ``max(1, |g|_inf)``.

    ``point`` is ``(mu, nu)`` stacked. Returns NaN when the point is within
    ``h_step`` of the box boundary, where central differences do not apply.
    """
    n = instance.n_bs
    z = np.asarray(point, dtype=float)
    if z.shape != (2 * n,):
        raise ValueError(f"point must have length {2 * n}")
    e = instance.energy
    lo = np.concatenate([e.price_sell, np.zeros(n)])
    hi = np.concatenate([e.price_buy, np.full(n, np.inf)])
    if np.any(z - h_step <= lo) or np.any(z + h_step >= hi):
        return float("nan")
    opts = options or SolverOptions(warm_start=False, fp_tol=1e-13)
    if zf:
        bases = null_space_bases(instance.channels)

        def oracle(x):
            return zf_dual_oracle(instance, x[:n], x[n:], bases)
    else:
        def oracle(x):
            return dual_oracle(instance, x[:n], x[n:], opts)

    g = oracle(z).subgradient
    fd = np.empty_like(g)
    for j in range(z.size):
        step = np.zeros_like(z)
        step[j] = h_step
        fd[j] = (oracle(z + step).value - oracle(z - step).value) / (2.0 * h_step)
    return float(np.max(np.abs(fd - g)) / max(1.0, np.max(np.abs(g))))
