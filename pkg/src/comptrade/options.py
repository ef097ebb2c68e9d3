from __future__ import annotations

from dataclasses import dataclass, fields, replace


@dataclass(frozen=True)
class SolverOptions:
    """Tolerances and budgets shared by all solvers.

    The ellipsoid stops once its certified dual gap is below
    ``max(tol, rtol * |dual value|)``, or once the best cap-respecting primal
    value seen is within ``gap_rtol * max(1, |dual value|)`` of the dual.
    ``nu_cap`` defaults to ``10 * price_cap / pa_efficiency``.
    ``feas_nu_cap`` bounds the per-BS power prices of the sum-power problem
    used by the feasibility checks and the conventional schemes.
    ``feas_rtol`` is the relative slack on caps and SINR targets when judging
    feasibility; ``cap_rtol`` the cap slack a solver allows its returned beams.
    """

    tol: float = 1e-13
    rtol: float = 1e-13
    gap_rtol: float | None = 1e-9
    max_iter: int | None = None
    fp_tol: float = 1e-10
    fp_max_iter: int = 10_000
    nu_cap: float | None = None
    feas_nu_cap: float = 1e3
    feas_rtol: float = 1e-6
    cap_rtol: float = 1e-9
    deep_cuts: bool = False
    warm_start: bool = True

    def updated(self, **overrides) -> SolverOptions:
        known = {f.name for f in fields(self)}
        unknown = set(overrides) - known
        if unknown:
            raise ValueError(f"unknown solver option(s): {', '.join(sorted(unknown))}")
        return replace(self, **{k: v for k, v in overrides.items() if v is not None})
