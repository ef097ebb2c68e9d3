from dataclasses import replace

import numpy as np
import pytest

from comptrade.baselines import conventional_optimal, conventional_zf, sum_power
from comptrade.duality import solve_joint
from comptrade.model import EnergyInputs, InfeasibleError, per_bs_power
from comptrade.zf import solve_zf

from helpers import feasible_instance, toy


class TestToy:
    def test_conventional_optimal(self):
        out = conventional_optimal(toy())
        assert out.scheme == "conv-optimal" and out.converged
        assert per_bs_power(out.beams, 1) == pytest.approx([0.64, 0.16], abs=1e-3)
        assert out.cost == pytest.approx(0.356, abs=1e-3)
        assert out.objective == pytest.approx(0.8, abs=1e-6)
        assert out.schedule.buy == pytest.approx([0.44, 0.0], abs=1e-3)
        assert out.schedule.sell == pytest.approx([0.0, 0.84], abs=1e-3)

    def test_single_user_zf_is_the_same(self):
        a, b = conventional_optimal(toy()), conventional_zf(toy())
        assert b.cost == pytest.approx(a.cost, abs=1e-6)

    def test_single_user_is_maximum_ratio(self):
        # with slack caps the beam is parallel to the channel
        out = conventional_optimal(toy())
        w = out.beams.w[:, 0]
        h = np.array([1.0, 0.5])
        assert abs(np.vdot(w, h)) / (np.linalg.norm(w) * np.linalg.norm(h)) == \
            pytest.approx(1.0, abs=1e-9)

    def test_infeasible_caps(self):
        with pytest.raises(InfeasibleError):
            conventional_optimal(toy(p_max=(0.1, 0.1)))

    def test_binding_cap_moves_power(self):
        out = conventional_optimal(toy(p_max=(0.5, 100.0)))
        pt = per_bs_power(out.beams, 1)
        assert pt[0] == pytest.approx(0.5, rel=1e-6)
        assert (np.sqrt(pt[0]) + 0.5 * np.sqrt(pt[1])) ** 2 == pytest.approx(1.0, rel=1e-8)


def test_beams_ignore_energy_prices():
    inst = toy()
    other = replace(inst, energy=EnergyInputs([5.0, 0.0], [3.0, 2.0], [0.5, 1.0]))
    a, b = conventional_optimal(inst), conventional_optimal(other)
    assert per_bs_power(a.beams, 1) == pytest.approx(per_bs_power(b.beams, 1), rel=1e-9)


@pytest.mark.parametrize("seed", range(3))
def test_joint_schemes_dominate(seed):
    inst = feasible_instance(np.random.default_rng(100 + seed), n_bs=2, n_ant=2)
    co, cz = conventional_optimal(inst), conventional_zf(inst)
    assert solve_joint(inst).cost <= co.cost + 1e-6 * max(1.0, abs(co.cost))
    assert solve_zf(inst).cost <= cz.cost + 1e-6 * max(1.0, abs(cz.cost))
    # ZF restricts the beams, so its minimum sum-power is no smaller
    assert cz.objective >= co.objective - 1e-6 * co.objective
    assert sum_power(co.beams, inst) == pytest.approx(co.objective)


@pytest.mark.parametrize("seed", range(3))
def test_equal_prices_collapse(seed):
    inst = feasible_instance(np.random.default_rng(200 + seed), n_bs=3, n_ant=2,
                             equal_price=True)
    for joint, conv in ((solve_joint, conventional_optimal), (solve_zf, conventional_zf)):
        a, b = joint(inst), conv(inst)
        assert abs(a.cost - b.cost) <= 1e-6 * max(1.0, abs(a.cost))
