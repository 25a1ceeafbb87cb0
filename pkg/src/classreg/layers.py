"""Differentiable layers of the host network.

Each layer caches what its backward pass needs; backward accumulates
parameter gradients into the layer's buffers and returns the input
gradient. A layer instance therefore belongs to one training thread.

Weight init is Kaiming fan-in scaling drawn from a per-parameter-name
splitmix64 stream, so adding or removing layers never shifts the draws of
the others.
"""

from __future__ import annotations

import math

import numpy as np

from . import tensor
from .backend import kernels
from .errors import InputError, ShapeError, StateError
from .rng import derive_seed, normal_array


class Parameter:
    __slots__ = ("name", "value", "grad", "velocity")

    def __init__(self, name: str, value: np.ndarray):
        self.name = name
        self.value = value
        self.grad = np.zeros_like(value)
        self.velocity = np.zeros_like(value)

    def zero_grad(self) -> None:
        self.grad[...] = 0.0


def kaiming_normal(seed: int, name: str, shape, fan_in: int) -> np.ndarray:
    scale = math.sqrt(2.0 / fan_in)
    flat = normal_array(derive_seed(seed, "init", name), int(np.prod(shape)))
    return (flat * scale).reshape(shape)


def global_avg_pool_stfw(a: np.ndarray) -> np.ndarray:
    """Mean over frames, height and width: [N,K,F,H,W] -> [N,K].

    Left-fold accumulation in row-major (f,h,w) order.
    """
    if a.ndim != 5:
        raise ShapeError(f"expected a 5-D activation, got rank {a.ndim}")
    n, k = a.shape[:2]
    count = a.shape[2] * a.shape[3] * a.shape[4]
    total = tensor.strict_sum_axis_last(np.ascontiguousarray(a).reshape(n, k, count))
    return total * (1.0 / count)


class Conv3dLayer:
    """Direct (naive-order) 3D cross-correlation plus bias."""

    def __init__(self, name: str, in_channels: int, out_channels: int,
                 kernel, stride=(1, 1, 1), padding=(0, 0, 0), seed: int = 0):
        self.name = name
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel = tuple(int(v) for v in kernel)
        self.stride = tuple(int(v) for v in stride)
        self.padding = tuple(int(v) for v in padding)
        if any(k < 1 for k in self.kernel) or any(s < 1 for s in self.stride):
            raise ShapeError("kernel and stride extents must be >= 1")
        if any(p < 0 for p in self.padding):
            raise ShapeError("padding must be non-negative")
        fan_in = in_channels * self.kernel[0] * self.kernel[1] * self.kernel[2]
        self.weights = Parameter(
            f"{name}.weights",
            kaiming_normal(seed, f"{name}.weights",
                           (out_channels, in_channels, *self.kernel), fan_in),
        )
        self.bias = Parameter(f"{name}.bias", np.zeros(out_channels))
        self._cache = None

    def out_shape(self, in_shape):
        c, f, h, w = in_shape
        if c != self.in_channels:
            raise ShapeError(
                f"{self.name}: expected {self.in_channels} input channels, got {c}"
            )
        dims = []
        for size, k, s, p in zip((f, h, w), self.kernel, self.stride, self.padding):
            o = (size + 2 * p - k) // s + 1
            if o < 1:
                raise ShapeError(f"{self.name}: empty output for input {in_shape}")
            dims.append(o)
        return (self.out_channels, *dims)

    def parameters(self):
        return [self.weights, self.bias]

    def forward(self, x: np.ndarray) -> np.ndarray:
        if x.ndim != 5:
            raise ShapeError(f"{self.name}: expected 5-D input, got rank {x.ndim}")
        out_kfhw = self.out_shape(x.shape[1:])
        pf, ph, pw = self.padding
        xp = np.ascontiguousarray(
            np.pad(x, ((0, 0), (0, 0), (pf, pf), (ph, ph), (pw, pw)))
        )
        out = kernels().conv3d_forward(
            xp, self.weights.value, self.bias.value, self.stride, out_kfhw[1:]
        )
        self._cache = (xp, x.shape)
        return out

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        if self._cache is None:
            raise StateError(f"{self.name}: backward called before forward")
        xp, x_shape = self._cache
        expected = (x_shape[0], *self.out_shape(x_shape[1:]))
        if grad_out.shape != expected:
            raise ShapeError(
                f"{self.name}: grad_out shape {grad_out.shape} != forward output {expected}"
            )
        gxp, gw, gb = kernels().conv3d_backward(
            xp, self.weights.value, np.ascontiguousarray(grad_out), self.stride
        )
        self.weights.grad += gw
        self.bias.grad += gb
        pf, ph, pw = self.padding
        f, h, w = x_shape[2:]
        return gxp[:, :, pf:pf + f, ph:ph + h, pw:pw + w]


class ReluLayer:
    def __init__(self, name: str = "relu"):
        self.name = name
        self._mask = None

    def out_shape(self, in_shape):
        return tuple(in_shape)

    def parameters(self):
        return []

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._mask = x > 0.0  # subgradient at exactly 0 is 0
        return np.maximum(x, 0.0)

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        if self._mask is None:
            raise StateError(f"{self.name}: backward called before forward")
        return grad_out * self._mask


class AvgPool3dLayer:
    """Non-overlapping average pooling (stride equals kernel)."""

    def __init__(self, name: str, kernel):
        self.name = name
        self.kernel = tuple(int(v) for v in kernel)
        if any(k < 1 for k in self.kernel):
            raise ShapeError("pool kernel extents must be >= 1")
        self._in_shape = None

    def out_shape(self, in_shape):
        c, f, h, w = in_shape
        for size, k in zip((f, h, w), self.kernel):
            if size % k != 0:
                raise ShapeError(
                    f"{self.name}: extent {size} not divisible by pool kernel {k}"
                )
        kf, kh, kw = self.kernel
        return (c, f // kf, h // kh, w // kw)

    def parameters(self):
        return []

    def forward(self, x: np.ndarray) -> np.ndarray:
        out_kfhw = self.out_shape(x.shape[1:])
        kf, kh, kw = self.kernel
        acc = np.zeros((x.shape[0], *out_kfhw))
        for a in range(kf):
            for b in range(kh):
                for c in range(kw):
                    acc += x[:, :, a::kf, b::kh, c::kw]
        self._in_shape = x.shape
        return acc * (1.0 / (kf * kh * kw))

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        if self._in_shape is None:
            raise StateError(f"{self.name}: backward called before forward")
        kf, kh, kw = self.kernel
        gx = np.empty(self._in_shape)
        spread = grad_out * (1.0 / (kf * kh * kw))
        for a in range(kf):
            for b in range(kh):
                for c in range(kw):
                    gx[:, :, a::kf, b::kh, c::kw] = spread
        return gx


class GlobalAvgPoolLayer:
    def __init__(self, name: str = "global_pool"):
        self.name = name
        self._in_shape = None

    def out_shape(self, in_shape):
        return (in_shape[0],)

    def parameters(self):
        return []

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._in_shape = x.shape
        return global_avg_pool_stfw(x)

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        if self._in_shape is None:
            raise StateError(f"{self.name}: backward called before forward")
        count = self._in_shape[2] * self._in_shape[3] * self._in_shape[4]
        gx = np.empty(self._in_shape)
        gx[...] = grad_out[:, :, None, None, None] * (1.0 / count)
        return gx


class FcLayer:
    """Final classifier: x [N,D] -> x . W^T + bias, W of shape [CL,D]."""

    def __init__(self, name: str, in_features: int, classes: int, seed: int = 0):
        if classes < 2:
            raise ShapeError(f"classifier needs >= 2 classes, got {classes}")
        if in_features < 1:
            raise ShapeError(f"classifier needs >= 1 features, got {in_features}")
        self.name = name
        self.in_features = in_features
        self.classes = classes
        self.weights = Parameter(
            f"{name}.weights",
            kaiming_normal(seed, f"{name}.weights", (classes, in_features), in_features),
        )
        self.bias = Parameter(f"{name}.bias", np.zeros(classes))
        self._cache = None

    def out_shape(self, in_shape):
        if len(in_shape) != 1 or in_shape[0] != self.in_features:
            raise ShapeError(
                f"{self.name}: expected features ({self.in_features},), got {tuple(in_shape)}"
            )
        return (self.classes,)

    def parameters(self):
        return [self.weights, self.bias]

    def forward(self, x: np.ndarray) -> np.ndarray:
        if x.ndim != 2 or x.shape[1] != self.in_features:
            raise ShapeError(
                f"{self.name}: expected [N,{self.in_features}], got {x.shape}"
            )
        self._cache = x
        return tensor.matmul(x, self.weights.value.T) + self.bias.value[None, :]

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        if self._cache is None:
            raise StateError(f"{self.name}: backward called before forward")
        x = self._cache
        if grad_out.shape != (x.shape[0], self.classes):
            raise ShapeError(
                f"{self.name}: grad_out shape {grad_out.shape} != [N,{self.classes}]"
            )
        for i in range(x.shape[0]):  # sample order fixed
            self.weights.grad += np.outer(grad_out[i], x[i])
        self.bias.grad += np.add.accumulate(grad_out, axis=0)[-1]
        return tensor.matmul(grad_out, self.weights.value)


def softmax(z: np.ndarray) -> np.ndarray:
    """Max-shifted normalized exponential along the last axis."""
    z = np.asarray(z, dtype=np.float64)
    shifted = z - np.max(z, axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / tensor.strict_sum_axis_last(e)[..., None]


def cross_entropy_loss(probs: np.ndarray, labels) -> tuple[float, np.ndarray]:
    """Mean negative log-likelihood and its gradient w.r.t. the logits."""
    labels = np.asarray(labels, dtype=np.int64)
    n, cl = probs.shape
    if labels.shape != (n,):
        raise ShapeError(f"expected {n} labels, got {labels.shape}")
    if np.any(labels < 0) or np.any(labels >= cl):
        raise InputError(f"labels must lie in [0, {cl})")
    picked = probs[np.arange(n), labels]
    loss = tensor.strict_sum(-np.log(picked)) / n
    grad = probs.copy()
    grad[np.arange(n), labels] -= 1.0
    grad *= 1.0 / n
    return loss, grad


def sgd_momentum_step(param: np.ndarray, grad: np.ndarray, velocity: np.ndarray,
                      lr: float, momentum: float) -> None:
    """v <- momentum*v + grad; param <- param - lr*v (all in place)."""
    if not (param.shape == grad.shape == velocity.shape):
        raise ShapeError(
            f"mismatched shapes: param {param.shape}, grad {grad.shape}, "
            f"velocity {velocity.shape}"
        )
    velocity *= momentum
    velocity += grad
    param -= lr * velocity
