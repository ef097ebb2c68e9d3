"""Conventional schemes: minimize the transmit sum-power under the SINR
targets and per-BS caps, then let every BS trade on its own.

With every energy price equal, the joint cost is an affine function of the
sum-power, so both schemes reuse the joint machinery with the energy prices
frozen at ``pa_efficiency``. The beam weights then read ``1 + nu_i``.
"""

from __future__ import annotations

import numpy as np

from .duality import (FixedPointError, check_nu_cap, joint_inner, outcome_from,
                      solve_energy_dual, within_caps)
from .ellipsoid import EllipsoidResult
from .model import (InfeasibleError, ProblemInstance, SolveOutcome, ZfInfeasibleError,
                    per_bs_power)
from .options import SolverOptions
from .zf import zf_inner, null_space_bases


def sum_power_offset(instance: ProblemInstance) -> float:
    """Constant separating the frozen-price energy dual from the sum-power dual."""
    c = instance.cluster
    return float(c.pa_efficiency * np.sum(c.p_circuit - instance.energy.harvest))


def sum_power(beams, instance: ProblemInstance) -> float:
    return float(np.sum(per_bs_power(beams, instance.cluster.n_ant)))


def min_sum_power(instance: ProblemInstance, zero_forcing: bool,
                  options: SolverOptions, watch=None) -> EllipsoidResult:
    """Dual of the per-BS-capped sum-power problem, maximized over ``nu`` in
    ``[0, options.feas_nu_cap]``.

    The returned ``value`` is the sum-power dual and ``payload`` the beams.
    ``watch``, if given, sees the beams of every oracle call.
    A diverging uplink iteration becomes :class:`InfeasibleError`.
    """
    if zero_forcing:
        inner = zf_inner(null_space_bases(instance.channels))
    else:
        inner = joint_inner(options)

    def primal(beams):
        if not within_caps(beams, instance, options.cap_rtol):
            return None
        return sum_power(beams, instance)
    if watch is not None:
        base = inner

        def inner(inst, noise):
            beams = base(inst, noise)
            watch(beams)
            return beams
    try:
        return solve_energy_dual(instance, inner, options,
                                 mu_fixed=instance.cluster.pa_efficiency,
                                 nu_cap=options.feas_nu_cap,
                                 offset=sum_power_offset(instance), primal=primal)
    except FixedPointError as exc:
        if exc.diverged:
            raise InfeasibleError(str(exc), float("inf")) from exc
        raise


def _conventional(instance, zero_forcing, options, scheme):
    opts = options or SolverOptions()
    res = min_sum_power(instance, zero_forcing, opts)
    error = ZfInfeasibleError if zero_forcing else InfeasibleError
    check_nu_cap(res, instance, opts.feas_nu_cap, opts.feas_rtol, scheme, error)
    return outcome_from(res, instance, scheme, objective=lambda b: sum_power(b, instance))


def conventional_optimal(instance: ProblemInstance,
                         options: SolverOptions | None = None) -> SolveOutcome:
    """Sum-power-minimal cooperative beams with independent per-BS trading.

    ``objective`` and ``dual_value`` of the outcome refer to the sum-power
    problem; ``cost`` is the resulting energy cost.
    """
    return _conventional(instance, False, options, "conv-optimal")


def conventional_zf(instance: ProblemInstance,
                    options: SolverOptions | None = None) -> SolveOutcome:
    """Zero-forcing variant of :func:`conventional_optimal`."""
    return _conventional(instance, True, options, "conv-zf")
