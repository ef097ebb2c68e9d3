from dataclasses import replace

import numpy as np
import pytest

from comptrade.baselines import conventional_optimal, conventional_zf
from comptrade.feasibility import check_feasible, check_zf_feasible, max_zf_residual
from comptrade.model import (BeamformingSolution, ChannelSet, QosTargets, ZfInfeasibleError,
                             per_bs_power, sinr_all)

from helpers import random_instance, toy

# smallest common cap that reaches SINR 1 at the toy MT: 1.5 sqrt(P) = 1
TOY_BOUNDARY = 1.0 / 2.25


def _with_caps(inst, caps):
    return replace(inst, cluster=replace(inst.cluster, p_max=np.asarray(caps, dtype=float)))


class TestJointFeasibility:
    def test_generous_caps(self):
        r = check_feasible(toy(p_max=(10.0, 10.0)))
        assert r.feasible and r.margin <= 1.0
        inst = toy()
        assert np.all(sinr_all(r.witness, inst.channels, inst.qos) >= 1.0 - 1e-6)

    def test_tight_caps(self):
        r = check_feasible(toy(p_max=(0.1, 0.1)))
        assert not r.feasible and r.margin > 1.0 and r.witness is None

    @pytest.mark.parametrize("scale,expected", [(1.0, True), (1.001, True), (0.999, False)])
    def test_boundary(self, scale, expected):
        cap = TOY_BOUNDARY * scale
        assert check_feasible(toy(p_max=(cap, cap))).feasible is expected

    def test_too_many_users_is_decided_by_the_solver(self):
        # K > MN rules out zero-forcing but not a general solution at low targets
        inst = random_instance(np.random.default_rng(0), n_bs=2, n_ant=1, n_mt=3, p_max=[1e3] * 2)
        inst = replace(inst, qos=QosTargets([0.1] * 3, [1.0] * 3))
        assert check_feasible(inst).feasible

    def test_unattainable_targets(self):
        inst = random_instance(np.random.default_rng(0), n_bs=2, n_ant=1, n_mt=2)
        inst = replace(inst, channels=ChannelSet(np.ones((2, 2), dtype=complex), 1),
                       qos=QosTargets([10.0, 10.0], [1.0, 1.0]))
        r = check_feasible(inst)
        assert not r.feasible and r.margin == np.inf

    def test_raising_caps_keeps_feasibility(self):
        rng = np.random.default_rng(1)
        for _ in range(5):
            inst = random_instance(rng, n_bs=2, n_ant=2, n_mt=2)
            verdicts = [check_feasible(_with_caps(inst, inst.cluster.p_max * s)).feasible
                        for s in (0.01, 0.1, 1.0, 10.0, 100.0)]
            assert verdicts == sorted(verdicts)


class TestZfFeasibility:
    def test_single_user_agrees_with_joint(self):
        rng = np.random.default_rng(2)
        for _ in range(6):
            inst = random_instance(rng, n_mt=1)
            assert check_zf_feasible(inst).feasible == check_feasible(inst).feasible

    def test_witness_is_zero_forcing(self):
        inst = random_instance(np.random.default_rng(3), n_bs=2, n_ant=2, n_mt=3,
                               p_max=[1e3, 1e3])
        r = check_zf_feasible(inst)
        assert r.feasible and max_zf_residual(r.witness, inst.channels.h) <= 1e-8

    def test_too_many_users(self):
        inst = random_instance(np.random.default_rng(0), n_bs=2, n_ant=1, n_mt=3)
        with pytest.raises(ZfInfeasibleError, match="K <= M\\*N"):
            check_zf_feasible(inst)

    def test_zf_feasible_implies_feasible(self):
        rng = np.random.default_rng(4)
        hits = 0
        for _ in range(12):
            inst = random_instance(rng, n_bs=2, n_ant=2, n_mt=2)
            if check_zf_feasible(inst).feasible:
                hits += 1
                assert check_feasible(inst).feasible
        assert hits > 0

    def test_general_feasible_but_not_zero_forcing(self):
        # nearly parallel channels: ZF pays far more power than cooperative MMSE
        h = np.array([[1.0, 0.95], [0.3, 0.35]], dtype=complex)
        base = toy(p_max=(1e3, 1e3))
        inst = replace(base, channels=ChannelSet(h, 1), qos=QosTargets([1.0, 1.0], [1.0, 1.0]),
                       cluster=replace(base.cluster, n_mt=2))
        opt, zf = conventional_optimal(inst), conventional_zf(inst)
        assert zf.objective > 1.5 * opt.objective
        # caps just above the cooperative optimum: it stays feasible, ZF cannot fit
        tight = _with_caps(inst, per_bs_power(opt.beams, 1) * 1.01)
        assert check_feasible(tight).feasible
        assert not check_zf_feasible(tight).feasible


def test_residual_of_orthogonal_beams_is_zero():
    h = np.eye(3, dtype=complex)
    assert max_zf_residual(BeamformingSolution(2.0 * h), h) == 0.0
    assert max_zf_residual(BeamformingSolution(np.ones((3, 3))), h) == pytest.approx(1 / np.sqrt(3))
