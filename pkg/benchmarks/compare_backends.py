"""Benchmark the numba kernels against the pure-numpy fallback.

Times the conv3d kernels in isolation, one full-network forward/backward,
and one optimizer step, under each backend. Also asserts the two paths
agree bit-exactly on everything they compute, so the speedup never buys a
different answer.

Usage: python benchmarks/compare_backends.py [--repeats N]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

import classreg.backend as backend
from classreg.config import DEFAULT_CONFIG, parse_run_config
from classreg.layers import cross_entropy_loss, sgd_momentum_step, softmax
from classreg.network import Network


def time_fn(fn, repeats: int, warmup: int = 3) -> float:
    for _ in range(warmup):
        fn()
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best * 1e3  # ms


def conv_kernel_case():
    rng = np.random.default_rng(0)
    xp = rng.standard_normal((16, 8, 10, 18, 18))
    wt = rng.standard_normal((12, 8, 3, 3, 3))
    bias = rng.standard_normal(12)
    out_shape = (8, 16, 16)
    go = rng.standard_normal((16, 12, *out_shape))
    return xp, wt, bias, (1, 1, 1), out_shape, go


def train_step_case():
    run = parse_run_config({k: v for k, v in DEFAULT_CONFIG.items() if k != "output"})
    net = Network(run.spec, seed=0)
    rng = np.random.default_rng(1)
    x = rng.standard_normal((16, 1, 8, 16, 16))
    y = np.arange(16) % 5

    def step():
        net.refresh_snapshots()
        logits = net.forward(x)
        probs = softmax(logits)
        _, dlogits = cross_entropy_loss(probs, y)
        net.zero_grad()
        net.backward(dlogits)
        for p in net.parameters():
            sgd_momentum_step(p.value, p.grad, p.velocity, 0.03, 0.9)

    return net, step


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    from classreg import _kernels_numba, _kernels_numpy

    xp, wt, bias, stride, out_shape, go = conv_kernel_case()
    results = {}
    checks = {}
    for name, mod in (("numba", _kernels_numba), ("numpy", _kernels_numpy)):
        fwd_ms = time_fn(lambda: mod.conv3d_forward(xp, wt, bias, stride, out_shape),
                         args.repeats)
        bwd_ms = time_fn(lambda: mod.conv3d_backward(xp, wt, go, stride), args.repeats)
        checks[name] = (
            mod.conv3d_forward(xp, wt, bias, stride, out_shape),
            mod.conv3d_backward(xp, wt, go, stride),
        )
        backend.set_backend(name)
        _, step = train_step_case()
        step_ms = time_fn(step, args.repeats)
        results[name] = (fwd_ms, bwd_ms, step_ms)

    assert np.array_equal(checks["numba"][0], checks["numpy"][0]), "forward differs"
    for a, b in zip(checks["numba"][1], checks["numpy"][1]):
        assert np.array_equal(a, b), "backward differs"

    print(f"{'':14s}{'conv fwd':>12s}{'conv bwd':>12s}{'train step':>12s}")
    for name in ("numba", "numpy"):
        fwd, bwd, step = results[name]
        print(f"{name:14s}{fwd:11.2f}ms{bwd:11.2f}ms{step:11.2f}ms")
    nf, nb_, ns = results["numba"]
    pf, pb, ps = results["numpy"]
    print(f"{'speedup':14s}{pf / nf:11.1f}x{pb / nb_:11.1f}x{ps / ns:11.1f}x")
    print("\nbit-exact across backends: yes")


if __name__ == "__main__":
    main()
