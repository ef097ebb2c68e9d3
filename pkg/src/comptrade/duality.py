"""Optimal joint energy trading and cooperative beamforming.

The dual of the cost-minimization problem is maximized over the per-BS
energy prices ``mu`` and power-cap prices ``nu``. For fixed duals the
beamforming subproblem is a weighted sum-power minimization under SINR
targets, solved through the dual uplink: a fixed point for the uplink powers,
MMSE receivers, then a linear system that rescales them into downlink
beamformers.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve, solve_triangular

from .ellipsoid import EllipsoidResult, SubgradientOracleResult, maximize
from .model import (BeamformingSolution, ChannelSet, EnergySchedule, InfeasibleError,
                    NotConvergedError, ProblemInstance, QosTargets, SolveOutcome,
                    consumption_all, per_bs_power, total_cost)
from .options import SolverOptions

log = logging.getLogger(__name__)


class FixedPointError(NotConvergedError):
    """The uplink power iteration did not settle.

    ``diverged`` is set when the powers blew up, which means the SINR targets
    cannot be met by any finite powers.
    """

    def __init__(self, message, last=None, diverged=False):
        super().__init__(message, last)
        self.diverged = diverged


@dataclass(frozen=True)
class WeightedNoise:
    """Per-BS weights ``mu_i / eta + nu_i`` of the dual weighting matrix."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        if w.ndim != 1 or np.any(~(w > 0)):
            raise ValueError("noise weights must be strictly positive")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @classmethod
    def from_duals(cls, mu, nu, pa_efficiency=1.0) -> WeightedNoise:
        return cls(np.asarray(mu, dtype=float) / pa_efficiency + np.asarray(nu, dtype=float))

    def diagonal(self, n_ant: int) -> np.ndarray:
        """Diagonal of the ``MN x MN`` weighting matrix."""
        return np.repeat(self.weights, n_ant)


@dataclass(frozen=True)
class UplinkSolution:
    lam: np.ndarray
    receivers: np.ndarray


# divergence guard: uplink SNR of this size only arises when the powers run away
_DIVERGENCE_SNR = 1e12


def _covariance(h, lam, bdiag):
    S = (h * lam) @ h.conj().T
    S.flat[::S.shape[0] + 1] += bdiag
    return S


def _quad_forms(h, lam, bdiag):
    """``h_k^H S(lam)^{-1} h_k`` for every k, via one Cholesky factor."""
    try:
        L = np.linalg.cholesky(_covariance(h, lam, bdiag))
    except np.linalg.LinAlgError as exc:  # cannot happen with positive weights
        raise FixedPointError("uplink covariance lost positive definiteness", lam) from exc
    y = solve_triangular(L, h, lower=True, check_finite=False)
    return np.einsum("ij,ij->j", y.real, y.real) + np.einsum("ij,ij->j", y.imag, y.imag)


def uplink_fixed_point(channels: ChannelSet, qos: QosTargets, noise: WeightedNoise,
                       tol: float = 1e-10, max_iter: int = 10_000, lam0=None,
                       trace: list | None = None) -> np.ndarray:
    """Uplink powers meeting every SINR target with equality.

    The powers solve ``lam_k = 1 / ((1 + 1/gamma_k) h_k^H S(lam)^{-1} h_k)``
    with ``S(lam) = sum_l lam_l h_l h_l^H + B``. That map is a damped average
    of the interference-only update ``lam_k = gamma_k / (h_k^H S_k^{-1} h_k)``
    (``S_k`` excluding MT k), which has the same fixed point and contracts much
    faster for large targets, so the latter is iterated, computed from the
    full-covariance quadratic form as ``gamma_k (1 - lam_k q_k) / q_k``.
    Starts from zero unless ``lam0`` is given and stops when the largest
    relative change is below ``tol``; ``trace`` collects every iterate.

    Raises :class:`FixedPointError` carrying the last iterate on failure.
    """
    h = channels.h
    gamma = qos.sinr_min
    bdiag = noise.diagonal(channels.n_ant)
    lam = np.zeros(h.shape[1]) if lam0 is None else np.array(lam0, dtype=float)
    # interference-free uplink SNR per unit power, for the divergence guard
    snr_unit = np.real(np.sum(h.conj() * (h / bdiag[:, None]), axis=0))
    limit = _DIVERGENCE_SNR * (1.0 + gamma)
    for _ in range(max_iter):
        q = _quad_forms(h, lam, bdiag)
        new = gamma * (1.0 - lam * q) / q
        if trace is not None:
            trace.append(new.copy())
        if not np.all(np.isfinite(new)) or np.any(new * snr_unit > limit):
            raise FixedPointError("uplink powers diverge: SINR targets are unattainable",
                                  lam, diverged=True)
        done = np.max(np.abs(new - lam) - tol * new) <= 0.0
        lam = new
        if done:
            return lam
    raise FixedPointError(f"uplink fixed point did not converge in {max_iter} iterations", lam)


def mmse_receivers(channels: ChannelSet, lam, noise: WeightedNoise) -> np.ndarray:
    """Unit-norm MMSE receivers ``S(lam)^{-1} h_k / ||S(lam)^{-1} h_k||`` as columns."""
    lam = np.asarray(lam, dtype=float)
    if np.any(lam < 0):
        raise ValueError("uplink powers must be non-negative")
    h = channels.h
    try:
        c = cho_factor(_covariance(h, lam, noise.diagonal(channels.n_ant)), lower=True,
                       check_finite=False)
    except LinAlgError as exc:
        raise ValueError("uplink covariance is singular") from exc
    v = cho_solve(c, h, check_finite=False)
    return v / np.linalg.norm(v, axis=0)


def downlink_scaling(channels: ChannelSet, qos: QosTargets, receivers):
    """Downlink powers ``p`` that make every SINR equal its target when
    transmitting along ``receivers``.

    Returns ``(p, beams)`` with ``beams.w[:, k] = sqrt(p_k) * receivers[:, k]``.
    """
    h = channels.h
    G = np.abs(h.conj().T @ receivers) ** 2  # G[k, l] = |h_k^H u_l|^2
    direct = np.diag(G).copy()
    if np.any(direct <= 0):
        raise ValueError("a receiver is orthogonal to its own channel")
    gamma = qos.sinr_min
    D = (gamma / direct)[:, None] * G
    np.fill_diagonal(D, 0.0)
    u = gamma * qos.noise_power / direct
    try:
        p = np.linalg.solve(np.eye(len(u)) - D, u)
    except np.linalg.LinAlgError as exc:
        raise ValueError("downlink power system is singular") from exc
    if np.any(p < -1e-12 * np.max(np.abs(p))):
        raise ValueError("downlink power system has a negative solution")
    p = np.maximum(p, 0.0)
    return p, BeamformingSolution(receivers * np.sqrt(p))


def optimal_beams(channels: ChannelSet, qos: QosTargets, noise: WeightedNoise,
                  tol: float = 1e-10, max_iter: int = 10_000, lam0=None):
    """Minimum weighted-power beams under the SINR targets.

    Returns ``(beams, uplink)``.
    """
    lam = uplink_fixed_point(channels, qos, noise, tol, max_iter, lam0)
    rx = mmse_receivers(channels, lam, noise)
    _, beams = downlink_scaling(channels, qos, rx)
    return beams, UplinkSolution(lam, rx)


def joint_inner(options: SolverOptions):
    state = {"lam": None}

    def inner(instance: ProblemInstance, noise: WeightedNoise) -> BeamformingSolution:
        lam0 = state["lam"] if options.warm_start else None
        beams, up = optimal_beams(instance.channels, instance.qos, noise,
                                  options.fp_tol, options.fp_max_iter, lam0)
        state["lam"] = up.lam
        return beams

    return inner


def energy_dual_oracle(instance: ProblemInstance, mu, nu,
                       inner: Callable[[ProblemInstance, WeightedNoise], BeamformingSolution]
                       ) -> SubgradientOracleResult:
    """Dual function value and supergradient at ``(mu, nu)`` for any inner
    beamforming solver; ``payload`` holds the inner beams."""
    c = instance.cluster
    mu = np.asarray(mu, dtype=float)
    nu = np.asarray(nu, dtype=float)
    beams = inner(instance, WeightedNoise.from_duals(mu, nu, c.pa_efficiency))
    pt = per_bs_power(beams, c.n_ant)
    g_mu = pt / c.pa_efficiency + c.p_circuit - instance.energy.harvest
    g_nu = pt - c.p_max
    value = float(mu @ g_mu + nu @ g_nu)
    return SubgradientOracleResult(value, np.concatenate([g_mu, g_nu]), payload=beams)


def dual_oracle(instance: ProblemInstance, mu, nu,
                options: SolverOptions | None = None) -> SubgradientOracleResult:
    """Dual function of the joint problem at ``(mu, nu)`` with optimal beams.

    ``mu`` must lie in the price box ``[price_sell, price_buy]`` and ``nu``
    must be non-negative; outside that box the dual is unbounded below.
    """
    opts = options or SolverOptions(warm_start=False)
    e = instance.energy
    mu = np.asarray(mu, dtype=float)
    if np.any(mu < e.price_sell) or np.any(mu > e.price_buy) or np.any(np.asarray(nu) < 0):
        raise ValueError("dual point outside the box price_sell <= mu <= price_buy, nu >= 0")
    return energy_dual_oracle(instance, mu, nu, joint_inner(opts))


def recover_schedule(beams: BeamformingSolution, instance: ProblemInstance) -> EnergySchedule:
    """Buy the deficit, sell the surplus, so every BS balances exactly."""
    net = consumption_all(beams, instance.cluster) - instance.energy.harvest
    return EnergySchedule(np.maximum(net, 0.0), np.maximum(-net, 0.0))


def default_nu_cap(instance: ProblemInstance) -> float:
    return 10.0 * instance.energy.price_cap / instance.cluster.pa_efficiency


def solve_energy_dual(instance: ProblemInstance, inner, options: SolverOptions,
                      mu_fixed=None, nu_cap: float | None = None,
                      offset: float = 0.0, primal=None) -> EllipsoidResult:
    """Maximize the energy-cost dual over ``(mu, nu)`` with the ellipsoid method.

    ``mu_fixed`` pins every ``mu_i`` (the conventional schemes and the
    feasibility checks use this); otherwise ``mu`` ranges over the price box.
    ``offset`` is subtracted from every dual value, which keeps the relative
    stopping rule meaningful when the dual carries a large constant term.
    ``primal(beams)`` returns the primal objective of the beams, or ``None``
    when they break a power cap; the smallest value seen bounds the optimum
    and drives the ``gap_rtol`` stopping rule.
    """
    n = instance.n_bs
    if mu_fixed is None:
        mu_lo, mu_hi = instance.energy.price_sell, instance.energy.price_buy
    else:
        mu_lo = mu_hi = np.broadcast_to(np.asarray(mu_fixed, dtype=float), (n,))
    cap = default_nu_cap(instance) if nu_cap is None else nu_cap
    lower = np.concatenate([mu_lo, np.zeros(n)])
    upper = np.concatenate([mu_hi, np.full(n, cap)])

    def oracle(z):
        r = energy_dual_oracle(instance, z[:n], z[n:], inner)
        p = None if primal is None else primal(r.payload)
        return SubgradientOracleResult(r.value - offset, r.subgradient, payload=r.payload,
                                       primal=p)

    res = maximize(oracle, lower, upper, tol=options.tol, max_iter=options.max_iter,
                   deep_cuts=options.deep_cuts, rtol=options.rtol, gap_rtol=options.gap_rtol)
    log.debug("ellipsoid: %d iterations, converged=%s, value=%.12g, bound=%.12g",
              res.iterations, res.converged, res.value, res.upper_bound)
    return res


def check_nu_cap(res: EllipsoidResult, instance: ProblemInstance, cap: float,
                 rtol: float, what: str, error=InfeasibleError) -> None:
    """Raise :class:`InfeasibleError` when a power price sits at its cap while
    the matching BS still exceeds its power limit."""
    n = instance.n_bs
    nu = res.point[n:]
    pt = per_bs_power(res.payload, instance.cluster.n_ant)
    over = pt > instance.cluster.p_max * (1.0 + rtol)
    if np.any((nu >= 0.999 * cap) & over):
        margin = float(np.max(pt / instance.cluster.p_max))
        raise error(
            f"{what}: power price reached its cap with BS powers above p_max "
            f"(max ratio {margin:.6g}); per-BS power constraints likely infeasible", margin)


def within_caps(beams: BeamformingSolution, instance: ProblemInstance, rtol: float) -> bool:
    c = instance.cluster
    return bool(np.all(per_bs_power(beams, c.n_ant) <= c.p_max * (1.0 + rtol)))


def cost_primal(instance: ProblemInstance, rtol: float):
    """Energy cost of cap-respecting beams, ``None`` otherwise."""
    def primal(beams):
        if not within_caps(beams, instance, rtol):
            return None
        return total_cost(recover_schedule(beams, instance), instance.energy)

    return primal


def outcome_from(res: EllipsoidResult, instance: ProblemInstance, scheme: str,
                 objective=None) -> SolveOutcome:
    """Package a dual solve. The beams are the best primal ones seen (the dual
    maximizer's beams when none respected the caps). ``objective`` maps beams
    to the primal value and defaults to their energy cost."""
    n = instance.n_bs
    beams = res.primal_payload if res.primal_payload is not None else res.payload
    schedule = recover_schedule(beams, instance)
    cost = total_cost(schedule, instance.energy)
    return SolveOutcome(
        beams=beams, schedule=schedule, cost=cost,
        dual_mu=res.point[:n].copy(), dual_nu=res.point[n:].copy(),
        dual_value=res.value, iterations=res.iterations, converged=res.converged,
        objective=cost if objective is None else float(objective(beams)), scheme=scheme,
        log=((res.iterations, res.value, res.upper_bound, res.primal),))


def solve_joint(instance: ProblemInstance, options: SolverOptions | None = None) -> SolveOutcome:
    """Minimum-cost joint energy trading and cooperative beamforming.

    Raises :class:`InfeasibleError` when the SINR targets are unattainable or
    the power caps look infeasible (power price stuck at its cap). An
    exhausted iteration budget yields ``converged=False``.
    """
    opts = options or SolverOptions()
    cap = opts.nu_cap if opts.nu_cap is not None else default_nu_cap(instance)
    try:
        res = solve_energy_dual(instance, joint_inner(opts), opts, nu_cap=cap,
                                primal=cost_primal(instance, opts.cap_rtol))
    except FixedPointError as exc:
        if exc.diverged:
            raise InfeasibleError(str(exc), float("inf")) from exc
        raise
    check_nu_cap(res, instance, cap, opts.feas_rtol, "joint solve")
    return outcome_from(res, instance, "optimal")
