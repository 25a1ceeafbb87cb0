"""Pure-numpy conv3d kernels, bit-identical to the numba loop nests.

Accumulation order is part of the kernel contract (see _kernels_numba):
every output element must receive its terms in exactly the same sequence in
both backends. Vectorization here is therefore restricted to axes that are
never reduced inside a single statement; reductions use np.add.accumulate,
which is a strict left fold, or explicit slice loops in the agreed order.
"""

from __future__ import annotations

import numpy as np


def _strict_sum_rows(a2d: np.ndarray) -> np.ndarray:
    """Left-fold sum along axis 1 (matches a sequential += loop bit-exactly)."""
    return np.add.accumulate(a2d, axis=1)[:, -1]


def conv3d_forward(xp: np.ndarray, wt: np.ndarray, bias: np.ndarray,
                   stride: tuple[int, int, int],
                   out_shape: tuple[int, int, int]) -> np.ndarray:
    # term order per output element: (ci, a, b, c) ascending, bias added last
    n = xp.shape[0]
    ko, ci_n, kf, kh, kw = wt.shape
    sf, sh, sw = stride
    fo, ho, wo = out_shape
    out = np.zeros((n, ko, fo, ho, wo))
    for ci in range(ci_n):
        for a in range(kf):
            for b in range(kh):
                for c in range(kw):
                    xs = xp[:, ci,
                            a:a + (fo - 1) * sf + 1:sf,
                            b:b + (ho - 1) * sh + 1:sh,
                            c:c + (wo - 1) * sw + 1:sw]
                    out += xs[:, None] * wt[None, :, ci, a, b, c, None, None, None]
    out += bias[None, :, None, None, None]
    return out


def conv3d_backward(xp: np.ndarray, wt: np.ndarray, go: np.ndarray,
                    stride: tuple[int, int, int]):
    """Returns (grad_xp, grad_w, grad_b) with numba-matching term order.

    grad_b[ko], grad_w[ko,ci,a,b,c]: one left-fold partial over (f,h,w) per
    sample, partials added in sample order. grad_xp elements accumulate in
    (ko, a, b, c) ascending order.
    """
    n = xp.shape[0]
    ko_n, ci_n, kf, kh, kw = wt.shape
    sf, sh, sw = stride
    fo, ho, wo = go.shape[2:]
    gxp = np.zeros_like(xp)
    gw = np.zeros_like(wt)
    gb = np.zeros(ko_n)

    for i in range(n):
        gb += _strict_sum_rows(go[i].reshape(ko_n, -1))

    for ci in range(ci_n):
        for a in range(kf):
            for b in range(kh):
                for c in range(kw):
                    xs = xp[:, ci,
                            a:a + (fo - 1) * sf + 1:sf,
                            b:b + (ho - 1) * sh + 1:sh,
                            c:c + (wo - 1) * sw + 1:sw]
                    prod = go * xs[:, None]
                    for i in range(n):
                        gw[:, ci, a, b, c] += _strict_sum_rows(prod[i].reshape(ko_n, -1))

    for ko in range(ko_n):
        for a in range(kf):
            for b in range(kh):
                for c in range(kw):
                    gxp[:, :,
                        a:a + (fo - 1) * sf + 1:sf,
                        b:b + (ho - 1) * sh + 1:sh,
                        c:c + (wo - 1) * sw + 1:sw] += (
                        go[:, ko, None] * wt[None, ko, :, a, b, c, None, None, None]
                    )
    return gxp, gw, gb
