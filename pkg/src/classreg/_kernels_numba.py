"""Numba @njit conv3d kernels (the hot loops).

Per-element accumulation order is the kernel contract shared with
_kernels_numpy — do not reorder loops in one file without the other:

  forward   out[i,ko,f,h,w]: terms in (ci, a, b, c) ascending, bias last
  grad_b[ko]               : per-sample left-fold partials, samples ascending
  grad_w[ko,ci,a,b,c]      : per-sample left-fold partials, samples ascending
  grad_xp[i,ci,fi,hi,wi]   : terms in (ko, a, b, c) ascending

The unit-width-stride branches exist only so LLVM can vectorize the inner
row loops; per element they perform the identical multiply/add sequence.
Kernels are strict IEEE (no fastmath), single-threaded, cached on disk.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def conv3d_forward(xp, wt, bias, stride, out_shape):
    n = xp.shape[0]
    ko_n, ci_n, kf, kh, kw = wt.shape
    sf, sh, sw = stride
    fo, ho, wo = out_shape
    out = np.zeros((n, ko_n, fo, ho, wo))
    for i in range(n):
        for ko in range(ko_n):
            for ci in range(ci_n):
                for a in range(kf):
                    for b in range(kh):
                        for c in range(kw):
                            wv = wt[ko, ci, a, b, c]
                            for f in range(fo):
                                fb = f * sf + a
                                for h in range(ho):
                                    hb = h * sh + b
                                    out_row = out[i, ko, f, h]
                                    xp_row = xp[i, ci, fb, hb]
                                    if sw == 1:
                                        for w in range(wo):
                                            out_row[w] += xp_row[w + c] * wv
                                    else:
                                        for w in range(wo):
                                            out_row[w] += xp_row[w * sw + c] * wv
            bv = bias[ko]
            for f in range(fo):
                for h in range(ho):
                    out_row = out[i, ko, f, h]
                    for w in range(wo):
                        out_row[w] += bv
    return out


@njit(cache=True)
def conv3d_backward(xp, wt, go, stride):
    n = xp.shape[0]
    ko_n, ci_n, kf, kh, kw = wt.shape
    sf, sh, sw = stride
    fo, ho, wo = go.shape[2], go.shape[3], go.shape[4]
    gxp = np.zeros_like(xp)
    gw = np.zeros_like(wt)
    gb = np.zeros(ko_n)
    for i in range(n):
        for ko in range(ko_n):
            accb = 0.0
            for f in range(fo):
                for h in range(ho):
                    go_row = go[i, ko, f, h]
                    for w in range(wo):
                        accb += go_row[w]
            gb[ko] += accb
            for ci in range(ci_n):
                for a in range(kf):
                    for b in range(kh):
                        for c in range(kw):
                            wv = wt[ko, ci, a, b, c]
                            acc = 0.0
                            for f in range(fo):
                                fb = f * sf + a
                                for h in range(ho):
                                    hb = h * sh + b
                                    go_row = go[i, ko, f, h]
                                    xp_row = xp[i, ci, fb, hb]
                                    gxp_row = gxp[i, ci, fb, hb]
                                    if sw == 1:
                                        for w in range(wo):
                                            acc += go_row[w] * xp_row[w + c]
                                        for w in range(wo):
                                            gxp_row[w + c] += go_row[w] * wv
                                    else:
                                        for w in range(wo):
                                            wb = w * sw + c
                                            g = go_row[w]
                                            acc += g * xp_row[wb]
                                            gxp_row[wb] += g * wv
                            gw[ko, ci, a, b, c] += acc
    return gxp, gw, gb
