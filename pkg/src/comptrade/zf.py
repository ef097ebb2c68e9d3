"""Zero-forcing joint energy trading and beamforming.

Each beam is confined to the null space of the other MTs' channels, which
turns the beamforming subproblem into K independent closed forms. The outer
loop is the same ellipsoid over ``(mu, nu)`` as the optimal solver.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .duality import (WeightedNoise, check_nu_cap, cost_primal, default_nu_cap,
                      energy_dual_oracle, outcome_from, solve_energy_dual)
from .ellipsoid import SubgradientOracleResult
from .model import (BeamformingSolution, ChannelSet, ProblemInstance, QosTargets, SolveOutcome,
                    ZfInfeasibleError)
from .options import SolverOptions

# H_{-k} counts as rank-deficient below this ratio of extreme singular values
RANK_RTOL = 1e-10


def _check_dimensions(channels: ChannelSet) -> None:
    if channels.n_mt > channels.n_tx:
        raise ZfInfeasibleError(
            f"zero-forcing needs K <= M*N, got K={channels.n_mt} > M*N={channels.n_tx}",
            float("inf"))


def null_space_basis(channels: ChannelSet, k: int) -> np.ndarray:
    """Orthonormal basis of the complement of the other MTs' channels.

    Returns an ``(MN, MN - K + 1)`` matrix whose columns are orthogonal to
    every ``h_l``, ``l != k``. With a single MT this is the identity.
    """
    if not 0 <= k < channels.n_mt:
        raise IndexError(f"MT index {k} out of range [0, {channels.n_mt})")
    _check_dimensions(channels)
    n_tx, n_mt = channels.h.shape
    if n_mt == 1:
        return np.eye(n_tx, dtype=complex)
    others = np.delete(channels.h, k, axis=1)
    # rows of vh span C^MN; the trailing MN-K+1 rows are orthogonal to every h_l
    _, s, vh = np.linalg.svd(others.conj().T, full_matrices=True)
    if s[-1] <= RANK_RTOL * s[0]:
        raise ZfInfeasibleError(
            f"channels of the MTs other than {k} are linearly dependent "
            f"(singular value ratio {s[-1] / s[0]:.3g}); zero-forcing is infeasible",
            float("inf"))
    return vh[n_mt - 1:].conj().T


def null_space_bases(channels: ChannelSet) -> np.ndarray:
    """All bases stacked as an array of shape ``(K, MN, MN - K + 1)``."""
    _check_dimensions(channels)
    return np.stack([null_space_basis(channels, k) for k in range(channels.n_mt)])


def zf_closed_form(channels: ChannelSet, qos: QosTargets, noise: WeightedNoise,
                   bases) -> BeamformingSolution:
    """Minimum weighted-power ZF beams.

    ``w_k = sigma_k sqrt(gamma_k) / q_k * V_k S_k^{-1} V_k^H h_k`` with
    ``S_k = V_k^H B V_k`` and ``q_k = h_k^H V_k S_k^{-1} V_k^H h_k``, so the
    received SNR equals the target exactly.
    """
    bdiag = noise.diagonal(channels.n_ant)
    h = channels.h
    sigma = np.sqrt(qos.noise_power)
    gamma = qos.sinr_min
    w = np.zeros_like(h)
    for k, V in enumerate(bases):
        x = V.conj().T @ h[:, k]
        S = V.conj().T @ (bdiag[:, None] * V)
        try:
            y = cho_solve(cho_factor(S, lower=True, check_finite=False), x, check_finite=False)
        except LinAlgError as exc:  # S is positive definite for positive weights
            raise ValueError("projected weighting matrix is singular") from exc
        q = float(np.real(np.vdot(x, y)))
        if not q > 1e-300 or np.linalg.norm(x) <= 1e-12 * np.linalg.norm(h[:, k]):
            raise ZfInfeasibleError(
                f"MT {k}'s channel lies in the span of the others; zero-forcing is infeasible",
                float("inf"))
        w[:, k] = (sigma[k] * np.sqrt(gamma[k]) / q) * (V @ y)
    return BeamformingSolution(w)


def zf_inner(bases):
    def inner(instance: ProblemInstance, noise: WeightedNoise) -> BeamformingSolution:
        return zf_closed_form(instance.channels, instance.qos, noise, bases)

    return inner


def zf_dual_oracle(instance: ProblemInstance, mu, nu, bases=None) -> SubgradientOracleResult:
    """Dual function of the ZF problem at ``(mu, nu)``; same box rules as
    :func:`comptrade.duality.dual_oracle`."""
    e = instance.energy
    mu = np.asarray(mu, dtype=float)
    if np.any(mu < e.price_sell) or np.any(mu > e.price_buy) or np.any(np.asarray(nu) < 0):
        raise ValueError("dual point outside the box price_sell <= mu <= price_buy, nu >= 0")
    if bases is None:
        bases = null_space_bases(instance.channels)
    return energy_dual_oracle(instance, mu, nu, zf_inner(bases))


def solve_zf(instance: ProblemInstance, options: SolverOptions | None = None) -> SolveOutcome:
    """Minimum-cost energy trading with zero-forcing beamforming.

    Raises :class:`ZfInfeasibleError` for structural failures (``K > MN``,
    dependent channels) and when a power price hits its cap while a BS is over
    its limit.
    """
    opts = options or SolverOptions()
    bases = null_space_bases(instance.channels)
    cap = opts.nu_cap if opts.nu_cap is not None else default_nu_cap(instance)
    res = solve_energy_dual(instance, zf_inner(bases), opts, nu_cap=cap,
                            primal=cost_primal(instance, opts.cap_rtol))
    check_nu_cap(res, instance, cap, opts.feas_rtol, "ZF solve", ZfInfeasibleError)
    return outcome_from(res, instance, "zf")
