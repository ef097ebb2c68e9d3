"""Can the per-BS power caps meet every SINR target?

Both checks solve the capped sum-power problem through its dual. A feasible
instance yields a witness whose caps and SINRs are re-verified with the model
evaluators. An infeasible one drives some power price to its cap, which is
how unboundedness of the dual shows up in a box. Anything in between is
reported as not converged.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .baselines import min_sum_power
from .model import (BeamformingSolution, InfeasibleError, NotConvergedError, ProblemInstance,
                    per_bs_power, sinr_all)
from .options import SolverOptions
from .zf import null_space_bases


@dataclass(frozen=True)
class FeasibilityReport:
    """``margin`` is ``max_i P_i / P_max,i`` of the sum-power-minimal beams
    found (``inf`` when the SINR targets are unattainable at any power)."""

    feasible: bool
    margin: float
    witness: BeamformingSolution | None = None
    nu: np.ndarray | None = None
    iterations: int = 0


def max_zf_residual(beams: BeamformingSolution, h) -> float:
    """Largest normalized leakage ``|h_l^H w_k| / (|h_l| |w_k|)``, ``l != k``."""
    g = np.abs(h.conj().T @ beams.w)
    scale = np.outer(np.linalg.norm(h, axis=0), np.linalg.norm(beams.w, axis=0))
    np.fill_diagonal(g, 0.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        r = np.where(scale > 0, g / scale, 0.0)
    return float(r.max(initial=0.0))


def _check(instance: ProblemInstance, zero_forcing: bool, options: SolverOptions | None):
    opts = options or SolverOptions()
    c = instance.cluster
    rtol = opts.feas_rtol

    def valid(beams):
        ratio = per_bs_power(beams, c.n_ant) / c.p_max
        ok = (np.all(ratio <= 1.0 + rtol)
              and np.all(sinr_all(beams, instance.channels, instance.qos)
                         >= instance.qos.sinr_min * (1.0 - rtol))
              and (not zero_forcing or max_zf_residual(beams, instance.channels.h) <= 1e-8))
        return ok, float(ratio.max())

    # every oracle call yields SINR-exact beams, so any of them within the caps
    # is a witness; near the boundary the final iterate may overshoot slightly
    found = {}

    def watch(beams):
        if "witness" not in found:
            ok, margin = valid(beams)
            if ok:
                found["witness"], found["margin"] = beams, margin

    try:
        res = min_sum_power(instance, zero_forcing, opts, watch)
    except InfeasibleError as exc:
        return FeasibilityReport(False, exc.margin)
    nu = res.point[instance.n_bs:]
    ok, margin = valid(res.payload)
    if ok:
        return FeasibilityReport(True, margin, res.payload, nu, res.iterations)
    if "witness" in found:
        return FeasibilityReport(True, found["margin"], found["witness"], nu, res.iterations)
    ratio = per_bs_power(res.payload, c.n_ant) / c.p_max
    beams = res.payload
    if np.any((nu >= 0.999 * opts.feas_nu_cap) & (ratio > 1.0 + rtol)):
        return FeasibilityReport(False, margin, None, nu, res.iterations)
    report = FeasibilityReport(False, margin, beams, nu, res.iterations)
    raise NotConvergedError(
        f"feasibility undecided: best beams exceed the caps by a factor {margin:.6g} "
        "while every power price stays below its cap", report)


def check_feasible(instance: ProblemInstance,
                   options: SolverOptions | None = None) -> FeasibilityReport:
    """Feasibility of the joint problem.

    Raises :class:`NotConvergedError` (carrying the report) when the verdict
    is ambiguous.
    """
    return _check(instance, False, options)


def check_zf_feasible(instance: ProblemInstance,
                      options: SolverOptions | None = None) -> FeasibilityReport:
    """Feasibility of the zero-forcing problem.

    Raises :class:`~comptrade.model.ZfInfeasibleError` when ``K > MN`` or the
    channels are linearly dependent.
    """
    null_space_bases(instance.channels)
    return _check(instance, True, options)
