import math

import pytest

from classreg.config import parse_run_config
from classreg.errors import ConfigError
from classreg.network import NetworkSpec, BlockPlacement
from classreg.profiling import bench_latency, bench_pair, block_macs, count_flops


def spec_with(layers, placements=(), input_shape=(1, 4, 8, 8), classes=5):
    return NetworkSpec(input_shape, classes, tuple(layers), tuple(placements))


UNIT_CONV = {"type": "conv3d", "out_channels": 1, "kernel": [1, 1, 1],
             "stride": [1, 1, 1], "padding": [0, 0, 0]}


class TestCountFlops:
    def test_unit_conv_is_one_mac(self):
        spec = spec_with(
            [UNIT_CONV, {"type": "global_avg_pool"}, {"type": "fc"}],
            input_shape=(1, 1, 1, 1), classes=2,
        )
        report = count_flops(spec)
        assert report.layers[0].macs == 1

    def test_hand_computed_conv(self):
        # 2->4 channels over 4x8x8, k=3, stride 1, pad 1: 4*4*8*8*2*27 = 55296
        spec = spec_with(
            [
                {"type": "conv3d", "out_channels": 2, "kernel": [1, 1, 1],
                 "stride": [1, 1, 1], "padding": [0, 0, 0]},
                {"type": "conv3d", "out_channels": 4, "kernel": [3, 3, 3],
                 "stride": [1, 1, 1], "padding": [1, 1, 1]},
                {"type": "global_avg_pool"},
                {"type": "fc"},
            ],
        )
        report = count_flops(spec)
        assert report.layers[1].macs == 55296
        assert report.total_flops_without == 2 * report.total_macs_without

    def test_fc_macs(self):
        spec = spec_with(
            [{"type": "conv3d", "out_channels": 7, "kernel": [1, 1, 1],
              "stride": [1, 1, 1], "padding": [0, 0, 0]},
             {"type": "global_avg_pool"}, {"type": "fc"}],
            classes=5,
        )
        report = count_flops(spec)
        fc = report.layers[-1]
        assert fc.kind == "fc"
        assert fc.macs == 1 * 5 * 7

    def test_block_macs_formula(self):
        # pool + proj + logits + normalize + excite, by hand:
        # K=6, D=7, CL=5, spatial 2x3x4, N=2
        # pool 2*6*24=288 ; proj 5*7*6=210 ; logits 2*5*6=60 ;
        # normalize 18 ; excite 288  => 864
        assert block_macs(6, 7, 5, (2, 3, 4), 2) == 864

    def test_block_additivity(self):
        layers = [
            {"type": "conv3d", "out_channels": 3, "kernel": [3, 3, 3],
             "stride": [1, 1, 1], "padding": [1, 1, 1]},
            {"type": "relu"},
            {"type": "global_avg_pool"},
            {"type": "fc"},
        ]
        with_blocks = count_flops(spec_with(layers, [BlockPlacement(1, 0.75, "straddle")]))
        without = count_flops(spec_with(layers))
        assert with_blocks.total_macs_without == without.total_macs_without
        assert with_blocks.total_macs_with - with_blocks.total_macs_without \
            == with_blocks.block_macs
        assert without.total_macs_with == without.total_macs_without

    def test_totals_are_ints_and_ordered(self):
        layers = [
            {"type": "conv3d", "out_channels": 4, "kernel": [3, 3, 3],
             "stride": [1, 1, 1], "padding": [1, 1, 1]},
            {"type": "relu"},
            {"type": "avgpool3d", "kernel": [2, 2, 2]},
            {"type": "global_avg_pool"},
            {"type": "fc"},
        ]
        report = count_flops(spec_with(layers, [BlockPlacement(1, 0.75, "straddle")]))
        assert isinstance(report.total_macs_with, int)
        assert report.total_macs_with >= report.total_macs_without
        assert sum(c.macs for c in report.layers) == report.total_macs_with

    def test_deterministic(self):
        layers = [
            {"type": "conv3d", "out_channels": 4, "kernel": [3, 3, 3],
             "stride": [1, 1, 1], "padding": [1, 1, 1]},
            {"type": "global_avg_pool"},
            {"type": "fc"},
        ]
        a = count_flops(spec_with(layers))
        b = count_flops(spec_with(layers))
        assert a.total_macs_with == b.total_macs_with


BENCH_CONFIG = {
    "schema_version": 1,
    "dataset": {"frames": 4, "height": 14, "width": 14, "noise": 1.0, "seed": 9,
                "n_train": 4, "n_val": 2},
    "network": {"layers": [
        {"type": "conv3d", "out_channels": 4, "kernel": [3, 3, 3], "padding": [1, 1, 1]},
        {"type": "relu"},
        {"type": "global_avg_pool"},
        {"type": "fc"},
    ]},
    "classreg": [{"placement": 1, "affection_rate": 0.75, "mode": "straddle"}],
    "train": {"epochs": 1, "batch_size": 2, "lr": 0.05, "momentum": 0.9, "seed": 0},
}


class TestBench:
    def test_reports_structure(self):
        run = parse_run_config(BENCH_CONFIG)
        out = bench_latency(run, "baseline", samples=10)
        assert out["samples"] == 10
        assert out["median_ms"] > 0.0
        assert out["iqr_ms"] >= 0.0
        assert math.isclose(out["iqr_ms"], out["p75_ms"] - out["p25_ms"], rel_tol=1e-9)

    def test_sample_floor(self):
        run = parse_run_config(BENCH_CONFIG)
        with pytest.raises(ConfigError):
            bench_latency(run, "baseline", samples=5)

    def test_bad_variant(self):
        run = parse_run_config(BENCH_CONFIG)
        with pytest.raises(ConfigError):
            bench_latency(run, "fast", samples=10)

    def test_pair_has_delta(self):
        run = parse_run_config(BENCH_CONFIG)
        out = bench_pair(run, samples=10)
        assert out["added_latency_ms"] == \
            out["classreg"]["median_ms"] - out["baseline"]["median_ms"]
