"""Analytic cost model and measured forward latency.

Multiply-accumulate counts per layer (batch N, FLOPs reported as 2*MACs):

    conv3d          N * K_out * F' * H' * W' * K_in * kf * kh * kw
    fc              N * CL * D
    avgpool3d       N * K * F * H * W      (input elements accumulated)
    global pool     N * K * F * H * W
    relu            0
    excitation blk  pool  N*K*F*H*W  +  proj  CL*D*K  +  logits N*CL*K
                    +  normalize 3*K  +  excite  N*K*F*H*W

Latency is the median over single-clip forward passes (warmup discarded);
spread is reported as the inter-quartile range, never asserted against
any external figure.
"""

from __future__ import annotations

import platform
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .data import generate_clip
from .errors import ConfigError
from .network import Network, NetworkSpec


@dataclass
class LayerCost:
    name: str
    kind: str
    macs: int
    out_shape: tuple


@dataclass
class CostReport:
    layers: list[LayerCost]
    block_macs: int
    total_macs_with: int
    total_macs_without: int
    total_flops_with: int
    total_flops_without: int
    batch: int
    host: str = field(default_factory=platform.platform)

    def to_dict(self) -> dict:
        return asdict(self)


def _layer_macs(desc: dict, in_shape, out_shape, batch: int, classes: int) -> int:
    kind = desc["type"]
    if kind == "conv3d":
        k_out, fo, ho, wo = out_shape
        kf, kh, kw = desc["kernel"]
        return batch * k_out * fo * ho * wo * in_shape[0] * kf * kh * kw
    if kind == "fc":
        return batch * classes * in_shape[0]
    if kind in ("avgpool3d", "global_avg_pool"):
        c, f, h, w = in_shape
        return batch * c * f * h * w
    if kind == "relu":
        return 0
    raise ConfigError(f"no cost rule for layer type {kind!r}")


def block_macs(channels: int, feature_dim: int, classes: int,
               spatial: tuple[int, int, int], batch: int) -> int:
    f, h, w = spatial
    volume = batch * channels * f * h * w
    return (
        volume                              # pooling
        + classes * feature_dim * channels  # pointwise projection
        + batch * classes * channels        # class logits
        + 3 * channels                      # normalization (min, max, scale)
        + volume                            # excitation product
    )


def count_flops(spec: NetworkSpec, batch: int = 1) -> CostReport:
    shapes = spec.propagate()
    feature_dim = spec.feature_dim()
    layers: list[LayerCost] = []
    host_total = 0
    in_shape = tuple(spec.input_shape)
    for i, desc in enumerate(spec.layers):
        out_shape = shapes[i]
        macs = _layer_macs(desc, in_shape, out_shape, batch, spec.classes)
        layers.append(LayerCost(name=f"layer{i}", kind=desc["type"],
                                macs=macs, out_shape=tuple(out_shape)))
        host_total += macs
        in_shape = out_shape

    blocks_total = 0
    for j, p in enumerate(sorted(spec.placements, key=lambda q: q.after_layer)):
        c, f, h, w = shapes[p.after_layer]
        macs = block_macs(c, feature_dim, spec.classes, (f, h, w), batch)
        layers.append(LayerCost(name=f"block{j}", kind="classreg",
                                macs=macs, out_shape=tuple(shapes[p.after_layer])))
        blocks_total += macs

    return CostReport(
        layers=layers,
        block_macs=blocks_total,
        total_macs_with=host_total + blocks_total,
        total_macs_without=host_total,
        total_flops_with=2 * (host_total + blocks_total),
        total_flops_without=2 * host_total,
        batch=batch,
    )


def bench_latency(run, variant: str, samples: int, warmup: int = 3,
                  seed: int = 0) -> dict:
    """Median and IQR (milliseconds) of single-clip forward passes."""
    if variant not in ("baseline", "classreg"):
        raise ConfigError(f"variant must be 'baseline' or 'classreg', got {variant!r}")
    if samples < 10:
        raise ConfigError(f"need at least 10 samples, got {samples}")
    if warmup < 3:
        raise ConfigError(f"need at least 3 warmup runs, got {warmup}")

    spec = run.spec if variant == "classreg" else run.spec.without_blocks()
    net = Network(spec, seed=seed)
    net.refresh_snapshots()
    clip, _ = generate_clip(run.dataset, 0)
    x = clip[None]

    for _ in range(warmup):
        net.forward(x)
    times = np.empty(samples)
    for i in range(samples):
        t0 = time.perf_counter()
        net.forward(x)
        times[i] = (time.perf_counter() - t0) * 1e3
    q25, q50, q75 = np.percentile(times, (25, 50, 75))
    return {
        "variant": variant,
        "samples": samples,
        "median_ms": float(q50),
        "iqr_ms": float(q75 - q25),
        "p25_ms": float(q25),
        "p75_ms": float(q75),
    }


def bench_pair(run, samples: int, warmup: int = 3, seed: int = 0) -> dict:
    """Both variants on identical host weights, plus the measured delta."""
    base = bench_latency(run, "baseline", samples, warmup, seed)
    reg = bench_latency(run, "classreg", samples, warmup, seed)
    return {
        "host": platform.platform(),
        "baseline": base,
        "classreg": reg,
        "added_latency_ms": reg["median_ms"] - base["median_ms"],
    }
