"""Central-cut ellipsoid method for maximizing a concave, possibly
non-differentiable function over a box."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SubgradientOracleResult:
    """What an oracle reports at a query point.

    For an objective cut, ``subgradient`` is an ascent supergradient ``g`` of
    the concave objective, i.e. ``f(y) <= value + g @ (y - x)``. For a
    feasibility cut it is a vector ``a`` such that every feasible ``y``
    satisfies ``a @ (y - x) >= 0``. ``payload`` is opaque data the caller may
    want back (e.g. the beamformers that produced ``value``). ``primal`` is an
    optional upper bound on the maximum, typically the primal objective of a
    feasible point recovered at ``x``.
    """

    value: float
    subgradient: np.ndarray
    is_feasibility_cut: bool = False
    payload: object = None
    primal: float | None = None


class EllipsoidResult(NamedTuple):
    point: np.ndarray
    value: float
    converged: bool
    iterations: int
    upper_bound: float
    payload: object = None
    primal: float = float("inf")
    primal_payload: object = None


def _initial_ellipsoid(lower, upper, radius):
    finite = np.isfinite(upper)
    center = np.where(finite, 0.5 * (lower + upper), lower + 1.0)
    if np.all(finite):
        r = 0.5 * np.linalg.norm(upper - lower)
    else:
        r = radius if radius is not None else 10.0
        # the ball must still cover the finite part of the box
        r = max(r, 0.5 * np.linalg.norm(np.where(finite, upper - lower, 0.0)) + 1.0)
    return center, (r * r) * np.eye(lower.size)


def maximize(oracle: Callable[[np.ndarray], SubgradientOracleResult],
             lower, upper, tol: float = 1e-7, max_iter: int | None = None,
             radius: float | None = None, deep_cuts: bool = False,
             rtol: float = 0.0, gap_rtol: float | None = None) -> EllipsoidResult:
    """Maximize a concave function over ``lower <= x <= upper``.

    The oracle is only queried at box-feasible points; box violations are
    handled here with face-normal feasibility cuts. Coordinates with
    ``lower == upper`` are pinned and excluded from the search.

    Stops once the certified gap ``min_t (f(x_t) + sqrt(g_t' A_t g_t)) - best``
    drops to ``max(tol, rtol * |best|)``, or once the width ``sqrt(g' A g)``
    at the query point drops to ``tol``. With ``gap_rtol`` it also stops once
    the smallest oracle-reported ``primal`` bound is within
    ``gap_rtol * max(1, |best|)`` of the best value. A shape matrix that loses
    positive definiteness ends the run as not converged.

    :param radius: initial radius for unbounded coordinates
        (default ``10``)
    :param deep_cuts: use deep cuts for box violations
    :return: best feasible point, its value, converged flag, iterations,
        certified upper bound on the maximum, the oracle payload at the best
        point, and the smallest primal bound with its payload
    """
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    if lower.shape != upper.shape or lower.ndim != 1:
        raise ValueError("lower and upper must be 1-d arrays of equal length")
    if np.any(lower > upper):
        raise ValueError("lower must not exceed upper")

    free = upper > lower
    d = int(free.sum())
    full = lower.copy()

    def embed(z):
        full[free] = z
        return full.copy()

    if d == 0:
        r = oracle(full.copy())
        p = np.inf if r.primal is None else float(r.primal)
        return EllipsoidResult(full.copy(), float(r.value), True, 0, float(r.value), r.payload,
                               p, r.payload if r.primal is not None else None)

    lo, hi = lower[free], upper[free]
    if max_iter is None:
        max_iter = 2000 * d * d
    x, A = _initial_ellipsoid(lo, hi, radius)

    best_x, best_val, best_payload = None, -np.inf, None
    primal, primal_payload = np.inf, None
    ub = np.inf
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        below = lo - x
        above = x - hi
        viol = np.maximum(below, above)
        j = int(np.argmax(viol))
        depth = 0.0
        if viol[j] > 0:
            a = np.zeros(d)
            a[j] = 1.0 if below[j] > 0 else -1.0
            if deep_cuts:
                depth = float(viol[j])
        else:
            r = oracle(embed(x))
            a = np.asarray(r.subgradient, dtype=float)[free]
            if not r.is_feasibility_cut:
                val = float(r.value)
                if val > best_val:
                    best_x, best_val, best_payload = x.copy(), val, r.payload
                if r.primal is not None and r.primal < primal:
                    primal, primal_payload = float(r.primal), r.payload
                if not np.any(a):
                    # zero supergradient: x is a maximizer
                    ub = val
                    converged = True
                    break
                width = float(np.sqrt(max(a @ A @ a, 0.0)))
                ub = min(ub, val + width)
                if ub - best_val <= max(tol, rtol * abs(best_val)) or width <= tol:
                    converged = True
                    break
                if gap_rtol is not None and primal - best_val <= gap_rtol * max(1.0, abs(best_val)):
                    converged = True
                    break
        # minimization-form cut: keep {y : g'(y - x) + depth <= 0}, g = -a
        g = -a
        Ag = A @ g
        gAg = float(g @ Ag)
        if not np.isfinite(gAg) or gAg <= 0.0:
            log.debug("ellipsoid degenerated at iteration %d", it)
            break
        gn = np.sqrt(gAg)
        gt = Ag / gn
        alpha = depth / gn
        if alpha >= 1.0:
            # the cut misses the ellipsoid entirely; the feasible set is
            # outside the current ellipsoid which cannot happen for a valid box
            log.debug("deep cut exceeded ellipsoid at iteration %d", it)
            break
        if d == 1:
            # interval update: keep the part of [x - s, x + s] on the kept side
            s = np.sqrt(A[0, 0])
            left, right = x[0] - s, x[0] + s
            cut = x[0] - depth / g[0]
            if g[0] > 0:
                right = cut
            else:
                left = cut
            x = np.array([0.5 * (left + right)])
            A = np.array([[(0.5 * (right - left)) ** 2]])
        else:
            x = x - (1.0 + d * alpha) / (d + 1.0) * gt
            A = (d * d / (d * d - 1.0)) * (1.0 - alpha * alpha) * (
                A - (2.0 * (1.0 + d * alpha) / ((d + 1.0) * (1.0 + alpha))) * np.outer(gt, gt))
            A = 0.5 * (A + A.T)
        if not np.all(np.isfinite(A)) or not np.all(np.isfinite(x)):
            break

    if best_x is None:
        x0 = np.clip(_initial_ellipsoid(lo, hi, radius)[0], lo, hi)
        r = oracle(embed(x0))
        p = np.inf if r.primal is None else float(r.primal)
        return EllipsoidResult(embed(x0), float(r.value), False, it, np.inf, r.payload,
                               p, r.payload if r.primal is not None else None)
    point = np.clip(embed(best_x), lower, upper)
    return EllipsoidResult(point, best_val, converged, it, ub, best_payload,
                           primal, primal_payload)
