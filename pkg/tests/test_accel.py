"""Analytical accelerator model: coverage, pipeline planning, cost rollups
and channel sweeps."""

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scsim.accel import (DEFAULT_LAYER_MACS, AcceleratorConfig, BlockCost,
                         LayerWorkload, MemoryModel, PipelineMode,
                         argmin_channels, bytes_per_neuron, channel_sweep,
                         default_workloads, gain, load_profiles, mem_cover,
                         metrics, network_latency, plan_counts, plan_pipeline,
                         rollup_cost)


def _cfg(channels=8, tau=1.0, k=32):
    return AcceleratorConfig(channels, tau, 8, k)


class TestConfig:
    def test_n_onchip(self):
        assert _cfg(channels=8).n_onchip == 128

    def test_positive_parameters(self):
        with pytest.raises(ValueError):
            AcceleratorConfig(0, 1.0, 8, 32)
        with pytest.raises(ValueError):
            AcceleratorConfig(1, 0.0, 8, 32)

    def test_workload_validation(self):
        with pytest.raises(ValueError):
            LayerWorkload(0, 50.0)
        with pytest.raises(ValueError):
            MemoryModel(0.0)


class TestMemCover:
    def test_default_bandwidth_example(self):
        # 224 B/ns, tau 1 ns, 50 B per neuron -> floor(4.48) = 4
        layer = LayerWorkload(100, bytes_per_neuron(8))
        assert bytes_per_neuron(8) == 50.0
        assert mem_cover(layer, MemoryModel(), 1.0) == 4

    def test_clamped_to_one(self):
        layer = LayerWorkload(10, 1e6)
        assert mem_cover(layer, MemoryModel(), 1.0) == 1

    def test_linear_in_tau(self):
        layer = LayerWorkload(10, 50.0)
        assert mem_cover(layer, MemoryModel(), 2.0) == \
            2 * mem_cover(layer, MemoryModel(), 1.0)

    def test_bad_tau(self):
        with pytest.raises(ValueError):
            mem_cover(LayerWorkload(1, 50.0), MemoryModel(), 0.0)


class TestPlanner:
    def test_non_pipelined_branch(self):
        plan = plan_counts(128, 128, 200, 32, 1.0)
        assert plan.mode is PipelineMode.NON_PIPELINED
        assert plan.d_layer_ns == 1 * 32 * 1.0
        assert plan.incycle_pipe == 0

    def test_partially_pipelined_branch(self):
        plan = plan_counts(128, 128, 16, 32, 1.0)
        assert plan.mode is PipelineMode.PARTIALLY_PIPELINED
        assert plan.incycle_pipe == 8
        assert plan.d_layer_ns == (1 * 33 + 7) * 1.0

    def test_fully_pipelined_branch(self):
        plan = plan_counts(128, 128, 2, 32, 1.0)
        assert plan.mode is PipelineMode.FULLY_PIPELINED
        assert plan.incycle_pipe == 64
        assert plan.d_layer_ns == (32 + 64) * 1.0

    def test_boundary_selects_fully(self):
        # incycle == k must take the fully pipelined branch
        plan = plan_counts(128, 128, 4, 32, 1.0)
        assert plan.incycle_pipe == 32
        assert plan.mode is PipelineMode.FULLY_PIPELINED

    @given(st.integers(1, 4000), st.integers(1, 512), st.integers(1, 512),
           st.integers(2, 256))
    @settings(max_examples=300, deadline=None)
    def test_exactly_one_mode_and_integral_cycles(self, n, onchip, cover, k):
        plan = plan_counts(n, onchip, cover, k, 1.0)
        assert plan.mode in PipelineMode
        cycles = plan.d_layer_ns / 1.0
        assert cycles == int(cycles)

    @given(st.integers(1, 4000), st.integers(1, 512), st.integers(1, 512),
           st.integers(2, 256))
    @settings(max_examples=200, deadline=None)
    def test_pipelining_never_hurts(self, n, onchip, cover, k):
        # overlapped loading beats loading the same incycle memory
        # batches back to back (incycle * k cycles)
        plan = plan_counts(n, onchip, cover, k, 1.0)
        if plan.mode is PipelineMode.FULLY_PIPELINED:
            assert plan.d_layer_ns <= plan.incycle_pipe * k * 1.0

    def test_plan_pipeline_wires_coverage(self):
        layer = LayerWorkload(128, 50.0)
        plan = plan_pipeline(layer, _cfg(channels=8, tau=1.0), MemoryModel())
        assert plan.n_memcover == 4


class TestNetworkLatency:
    def test_single_small_layer_is_k_tau(self):
        # memory out-covers a tiny layer: non-pipelined single batch
        layer = LayerWorkload(2, 50.0)
        cfg = _cfg(channels=1, tau=1.0, k=32)
        assert network_latency([layer], cfg, MemoryModel()) == 32.0

    def test_monotone_in_channels(self, rng):
        mem = MemoryModel()
        for _ in range(100):
            n = int(rng.integers(1, 20000))
            k = int(rng.choice([8, 32, 128]))
            wl = [LayerWorkload(n, 50.0)]
            prev = None
            for c in (1, 2, 4, 8, 16, 32, 64):
                lat = network_latency(wl, _cfg(channels=c, k=k), mem)
                if prev is not None:
                    assert lat <= prev + 1e-9
                prev = lat

    def test_saturates_when_memory_bound(self):
        wl = default_workloads(8)
        mem = MemoryModel()
        lat_big = network_latency(wl, _cfg(channels=256), mem)
        lat_huge = network_latency(wl, _cfg(channels=1024), mem)
        assert lat_big == lat_huge


class TestProfiles:
    def test_bundled_profiles_load(self):
        profiles = load_profiles()
        assert set(profiles) == {"finfet-10nm", "rfet-10nm"}
        fin = profiles["finfet-10nm"]
        assert fin.channel.area_um2 == pytest.approx(2475.0)
        assert fin.pcc.delay_ns == pytest.approx(0.242)
        assert fin.supply_v == pytest.approx(0.7)
        assert fin.area_scale == pytest.approx(2.1)

    def test_missing_entry_raises(self, tmp_path):
        (tmp_path / "p.json").write_text('{"x": {"pcc": {}}}')
        with pytest.raises(KeyError):
            load_profiles(tmp_path / "p.json")

    def test_block_cost_positive(self):
        with pytest.raises(ValueError):
            BlockCost(1.0, 0.0, 1.0)

    def test_gain_sign_convention(self):
        assert gain(100.0, 90.0) == pytest.approx(10.0)
        assert gain(100.0, 110.0) == pytest.approx(-10.0)


class TestRollup:
    def test_area_linear_in_channels(self):
        prof = load_profiles()["finfet-10nm"]
        a1 = rollup_cost(_cfg(channels=1), prof)["area_um2"]
        a8 = rollup_cost(_cfg(channels=8), prof)["area_um2"]
        assert a8 == pytest.approx(8 * a1)

    def test_min_clock_is_worst_block(self):
        prof = load_profiles()["finfet-10nm"]
        cost = rollup_cost(_cfg(), prof)
        assert cost["min_clock_ns"] == pytest.approx(
            max(prof.pcc.delay_ns, prof.apc.delay_ns, prof.channel.delay_ns))

    def test_energy_counts_active_macs(self):
        prof = load_profiles()["finfet-10nm"]
        cfg = _cfg(k=32)
        cost = rollup_cost(cfg, prof, [LayerWorkload(160, 50.0)])
        expect = 160 * 32 * prof.channel.energy_pj / 16
        assert cost["energy_pj"] == pytest.approx(expect)

    def test_metrics_arithmetic(self):
        m = metrics(2.0, 3.0, 5.0)
        assert m == {"adp": 10.0, "edp": 15.0, "edap": 30.0}

    def test_metrics_scaling(self):
        base = metrics(2.0, 3.0, 5.0)
        scaled = metrics(4.0, 3.0, 5.0)
        assert scaled["adp"] == 2 * base["adp"]
        assert scaled["edp"] == base["edp"]

    def test_metrics_positive(self):
        with pytest.raises(ValueError):
            metrics(0.0, 1.0, 1.0)


class TestSweep:
    def test_row_grid(self):
        rows = channel_sweep(default_workloads(), [1, 2, 3],
                             load_profiles())
        assert len(rows) == 6
        assert {r.profile for r in rows} == {"finfet-10nm", "rfet-10nm"}

    def test_empty_range_rejected(self):
        with pytest.raises(ValueError):
            channel_sweep(default_workloads(), [], load_profiles())

    def test_argmin_channels(self):
        rows = channel_sweep(default_workloads(), range(1, 33),
                             load_profiles())
        best = argmin_channels(rows, "edap")
        assert set(best) == {"finfet-10nm", "rfet-10nm"}
        for c in best.values():
            assert 1 < c < 32     # interior optimum

    def test_default_workload_shape(self):
        wl = default_workloads(8)
        assert [w.n_neurons for w in wl] == list(DEFAULT_LAYER_MACS)
