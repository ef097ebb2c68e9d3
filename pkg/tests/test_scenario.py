import io
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from comptrade.model import (ChannelSet, ClusterConfig, EnergyInputs, InfeasibleError,
                             ProblemInstance, QosTargets)
from comptrade.scenario import (LayoutSpec, RenewableSeries, bs_positions, channel_gain,
                                dbm_to_watt, format_renewable_csv, generate_channels,
                                load_renewable_csv, parse_renewable_csv, run_timeline,
                                small_scale_fading, synthetic_renewables, write_renewable_csv)

from helpers import random_instance, toy

CLUSTER = ClusterConfig(3, 4, 8, 0.1, [100.0] * 3, [500.0] * 3)


class TestChannels:
    def test_deterministic(self):
        a = generate_channels(LayoutSpec(seed=7), CLUSTER, 0)
        b = generate_channels(LayoutSpec(seed=7), CLUSTER, 0)
        assert np.array_equal(a.h, b.h)

    def test_seeds_differ(self):
        a = generate_channels(LayoutSpec(seed=7), CLUSTER, 0)
        assert not np.array_equal(a.h, generate_channels(LayoutSpec(seed=8), CLUSTER, 0).h)
        assert not np.array_equal(a.h, generate_channels(LayoutSpec(seed=7), CLUSTER, 1).h)

    def test_shape(self):
        h = generate_channels(LayoutSpec(), CLUSTER, 3)
        assert h.h.shape == (12, 8) and h.n_ant == 4

    def test_fading_has_unit_power(self):
        g = small_scale_fading(np.random.default_rng(0), 200_000)
        assert np.mean(np.abs(g) ** 2) == pytest.approx(1.0, rel=0.01)

    def test_mean_gain_follows_path_loss(self):
        layout = LayoutSpec()
        d = 400.0
        rng = np.random.default_rng(1)
        samples = np.sqrt(channel_gain(d, layout)) * small_scale_fading(rng, 50_000)
        assert np.mean(np.abs(samples) ** 2) == pytest.approx(channel_gain(d, layout), rel=0.03)

    @pytest.mark.parametrize("d", [100.0, 500.0, 2000.0])
    def test_doubling_distance(self, d):
        ratio = channel_gain(2 * d, LayoutSpec()) / channel_gain(d, LayoutSpec())
        assert ratio == pytest.approx(2.0 ** -3.76, rel=0.05)

    def test_one_km_reference(self):
        assert channel_gain(1000.0, LayoutSpec()) == pytest.approx(10 ** -12.81)

    def test_minimum_distance_clamp(self):
        assert channel_gain(1.0, LayoutSpec()) == channel_gain(35.0, LayoutSpec())

    def test_three_cells_form_a_triangle(self):
        p = bs_positions(3, 1000.0)
        d = [np.linalg.norm(p[i] - p[j]) for i, j in ((0, 1), (1, 2), (0, 2))]
        assert d == pytest.approx([1000.0] * 3)

    def test_noise_conversion(self):
        assert dbm_to_watt(-85.0) == pytest.approx(3.1623e-12, rel=1e-4)


class TestRenewableCsv:
    series = RenewableSeries([0, 1, 5], [[1.0, 2.5], [0.0, 3.25], [1e-3, 7.0]])

    def test_round_trip(self, tmp_path):
        path = tmp_path / "r.csv"
        write_renewable_csv(self.series, path)
        back = load_renewable_csv(path, 2)
        assert np.array_equal(back.blocks, self.series.blocks)
        assert np.array_equal(back.energy, self.series.energy)

    @settings(max_examples=30, deadline=None)
    @given(st.lists(st.lists(st.floats(0, 1e6), min_size=3, max_size=3), min_size=1,
                    max_size=6))
    def test_round_trip_is_exact(self, rows):
        s = RenewableSeries(np.arange(len(rows)), rows)
        back = parse_renewable_csv(io.StringIO(format_renewable_csv(s)), 3)
        assert np.array_equal(back.energy, s.energy)

    def test_no_samples(self):
        with pytest.raises(ValueError, match="no samples"):
            parse_renewable_csv(io.StringIO("block,bs_id,energy\n"))

    def test_bad_header(self):
        with pytest.raises(ValueError, match=":1:"):
            parse_renewable_csv(io.StringIO("t,bs,e\n0,0,1\n"))

    def test_malformed_line_is_named(self):
        text = "block,bs_id,energy\n0,0,1.0\n0,1,oops\n"
        with pytest.raises(ValueError, match="<stream>:3:"):
            parse_renewable_csv(io.StringIO(text), 2)

    def test_bs_out_of_range(self):
        with pytest.raises(ValueError, match=":2: bs_id 2 outside"):
            parse_renewable_csv(io.StringIO("block,bs_id,energy\n0,2,1.0\n"), 2)

    def test_missing_bs(self):
        with pytest.raises(ValueError, match="no sample for bs_id 1"):
            parse_renewable_csv(io.StringIO("block,bs_id,energy\n0,0,1.0\n"), 2)

    def test_negative_energy(self):
        with pytest.raises(ValueError, match="non-negative"):
            parse_renewable_csv(io.StringIO("block,bs_id,energy\n0,0,-1\n"), 1)

    def test_duplicate(self):
        with pytest.raises(ValueError, match="duplicate"):
            parse_renewable_csv(io.StringIO("block,bs_id,energy\n0,0,1\n0,0,2\n"), 1)


class TestSynthetic:
    def test_shape_and_range(self):
        s = synthetic_renewables(3, 48, seed=1, peak=800.0)
        assert len(s) == 48 and s.n_bs == 3
        assert np.all(s.energy >= 0.0) and np.all(s.energy <= 800.0)

    def test_deterministic(self):
        a, b = synthetic_renewables(3, 10, 5), synthetic_renewables(3, 10, 5)
        assert np.array_equal(a.energy, b.energy)

    def test_solar_is_dark_at_night(self):
        s = synthetic_renewables(1, 24, sources=["solar"], blocks_per_day=24)
        assert s.energy[0, 0] == 0.0 and s.energy[12, 0] == pytest.approx(1000.0)

    def test_unknown_source(self):
        with pytest.raises(ValueError):
            synthetic_renewables(1, 3, sources=["coal"])


class TestTimeline:
    series = RenewableSeries([0, 1, 2], [[0.2, 1.0], [1.0, 0.2], [0.0, 0.0]])

    def test_toy_per_block_dominance(self):
        rep = run_timeline(toy(), self.series)
        for a, b in (("optimal", "conv-optimal"), ("zf", "conv-zf")):
            ca, cb = rep.block_costs(a), rep.block_costs(b)
            assert ca.keys() == cb.keys() == {0, 1, 2}
            assert all(ca[t] <= cb[t] + 1e-6 for t in ca)
        assert rep.block_costs("optimal")[0] == pytest.approx(0.05, abs=1e-3)

    def test_equal_prices_pair_up(self):
        inst = toy().with_energy(EnergyInputs([0.2, 1.0], [0.5, 0.5], [0.5, 0.5]))
        rep = run_timeline(inst, self.series)
        for a, b in (("optimal", "conv-optimal"), ("zf", "conv-zf")):
            ca, cb = rep.block_costs(a), rep.block_costs(b)
            assert [ca[t] for t in ca] == pytest.approx([cb[t] for t in cb], abs=1e-6)

    def test_cache_gives_the_same_conventional_costs(self):
        cached = run_timeline(toy(), self.series, ["conv-optimal"])
        fresh = run_timeline(toy(), self.series, ["conv-optimal"], cache_conventional=False)
        assert cached.block_costs("conv-optimal") == pytest.approx(
            fresh.block_costs("conv-optimal"), abs=1e-9)

    @pytest.mark.parametrize("policy,expected", [("skip", 0), ("record-infeasible", 1)])
    def test_failure_policies(self, policy, expected):
        # three MTs on two antennas: zero-forcing is impossible, the joint scheme is not
        inst = random_instance(np.random.default_rng(0), n_bs=2, n_ant=1, n_mt=3,
                               p_max=[1e3, 1e3])
        inst = replace(inst, qos=QosTargets([0.1] * 3, [1.0] * 3))
        rep = run_timeline(inst, self.series, ["optimal", "zf"], policy=policy)
        assert rep.blocks_feasible("zf") == 0
        assert rep.blocks_feasible("optimal") == 3 * expected
        assert all("K <= M*N" in r.message for r in rep.rows("zf"))

    def test_error_policy_raises(self):
        with pytest.raises(InfeasibleError):
            run_timeline(toy(p_max=(0.1, 0.1)), self.series, ["optimal"], policy="error")

    def test_outputs_are_byte_identical(self, tmp_path):
        cluster = ClusterConfig(2, 2, 2, 0.5, [1e3, 1e3], [1.0, 1.0])
        template = ProblemInstance(cluster, EnergyInputs([1.0, 1.0], [1.0, 1.0], [0.1, 0.1]),
                                   ChannelSet(np.ones((4, 2), dtype=complex), 2),
                                   QosTargets([1.0, 1.0], [dbm_to_watt(-85.0)] * 2))
        series = synthetic_renewables(2, 3, seed=7, peak=3.0, blocks_per_day=3)
        out = []
        for run in ("a", "b"):
            rep = run_timeline(template, series, layout=LayoutSpec(seed=7),
                               channel_mode="per-block")
            rep.write(tmp_path / run)
            out.append([(tmp_path / run / f).read_bytes() for f in ("report.csv", "summary.csv")])
        assert out[0] == out[1]
        assert out[0][1].decode().count("\n") == 5

    def test_validation(self):
        with pytest.raises(ValueError, match="unknown scheme"):
            run_timeline(toy(), self.series, ["best"])
        with pytest.raises(ValueError, match="BSs"):
            run_timeline(toy(), RenewableSeries([0], [[1.0, 1.0, 1.0]]))
