"""Shared test utilities: independent oracles and finite-difference checks."""

from __future__ import annotations

import numpy as np


def brute_force_conv3d(x, weights, bias, stride, padding):
    """Independent quintuple-loop 3D cross-correlation (the test oracle).

    Written against the mathematical definition only; it shares no code
    with the library kernels.
    """
    n, c_in, f, h, w = x.shape
    k_out, _, kf, kh, kw = weights.shape
    sf, sh, sw = stride
    pf, ph, pw = padding
    xp = np.zeros((n, c_in, f + 2 * pf, h + 2 * ph, w + 2 * pw))
    xp[:, :, pf:pf + f, ph:ph + h, pw:pw + w] = x
    fo = (f + 2 * pf - kf) // sf + 1
    ho = (h + 2 * ph - kh) // sh + 1
    wo = (w + 2 * pw - kw) // sw + 1
    out = np.empty((n, k_out, fo, ho, wo))
    for i in range(n):
        for ko in range(k_out):
            for fi in range(fo):
                for hi in range(ho):
                    for wi in range(wo):
                        patch = xp[i, :,
                                   fi * sf:fi * sf + kf,
                                   hi * sh:hi * sh + kh,
                                   wi * sw:wi * sw + kw]
                        out[i, ko, fi, hi, wi] = np.sum(patch * weights[ko]) + bias[ko]
    return out


def rel_err(a: float, b: float, floor: float = 1e-3) -> float:
    """Relative error with an absolute floor for near-zero gradients."""
    return abs(a - b) / max(abs(a), abs(b), floor)


def central_diff(f, x: np.ndarray, eps: float = 1e-5) -> np.ndarray:
    """Central finite differences of scalar f w.r.t. every element of x."""
    grad = np.empty_like(x)
    for idx in np.ndindex(x.shape):
        xp, xm = x.copy(), x.copy()
        xp[idx] += eps
        xm[idx] -= eps
        grad[idx] = (f(xp) - f(xm)) / (2.0 * eps)
    return grad


def max_rel_err(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-3) -> float:
    worst = 0.0
    for a, b in zip(analytic.ravel(), numeric.ravel()):
        worst = max(worst, rel_err(float(a), float(b), floor))
    return worst
