"""Class-conditional activation excitation block.

Dataflow per forward pass on activations a [N,K,F,H,W]:

  1. pool a over frames/height/width            -> pooled [N,K]
  2. pointwise-convolve the classifier snapshot -> W_i    [CL,K]
  3. class scores Z = pooled . W_i^T            -> Z      [N,CL]
  4. pick the winning class per sample (argmax) -> C      [N]
  5. normalize the winning weight row by the
     affection rate                             -> w_hat  [N,K]
  6. scale channels: out = a * w_hat            (same shape as a)

The snapshot is a detached copy of the live classifier weights, refreshed
once per training iteration before the forward pass; gradients flow into
the pointwise projection but never into the snapshot, and the argmax index
is treated as a constant.
"""

from __future__ import annotations

import numpy as np

from . import tensor
from .errors import ConfigError, InputError, ShapeError, StateError
from .layers import Conv3dLayer, global_avg_pool_stfw, softmax

NORM_MODES = ("straddle", "unit_cap", "paper_literal")

_DEGENERATE_EPS = 1e-12


class ClassifierSnapshot:
    """Detached copy of the classifier weight matrix [CL, D]."""

    __slots__ = ("weights",)

    def __init__(self, weights: np.ndarray):
        if weights.ndim != 2:
            raise ShapeError(f"snapshot weights must be [CL, D], got {weights.shape}")
        self.weights = weights.copy()


def select_class(z: np.ndarray) -> np.ndarray:
    """Per-sample argmax over class scores (softmax is monotone, so the
    argmax of the probabilities equals the argmax of the raw scores).
    Ties break to the lowest index; no gradient flows through the index."""
    if z.ndim != 2 or z.shape[1] < 2:
        raise ShapeError(f"expected scores [N, CL>=2], got {z.shape}")
    return np.argmax(z, axis=1)


def class_logits(w_i: np.ndarray, pooled: np.ndarray) -> np.ndarray:
    """Z[n,c] = sum_k W_i[c,k] * pooled[n,k]."""
    if w_i.ndim != 2 or pooled.ndim != 2 or w_i.shape[1] != pooled.shape[1]:
        raise ShapeError(
            f"channel extents differ: weights {w_i.shape}, pooled {pooled.shape}"
        )
    return tensor.matmul(pooled, w_i.T)


def _mode_span(affection_rate: float, mode: str) -> tuple[float, float]:
    """(base, span) so that w_hat = base + span * (w - min)/(max - min)."""
    a = affection_rate
    if mode == "straddle":
        return a, 2.0 - 2.0 * a
    if mode == "unit_cap":
        return a, 1.0 - a
    if mode == "paper_literal":
        return 0.0, a * (1.0 - a)
    raise ConfigError(f"unknown normalization mode {mode!r}; expected one of {NORM_MODES}")


def _check_affection_rate(a: float) -> float:
    a = float(a)
    if not 0.0 < a <= 1.0:
        raise ConfigError(f"affection rate must lie in (0, 1], got {a}")
    return a


def normalize_affection(w: np.ndarray, affection_rate: float, mode: str = "straddle") -> np.ndarray:
    """Rescale a weight row into the bounds set by the affection rate.

    straddle maps onto [A, 2-A] (factors below/above 1 suppress/amplify),
    unit_cap onto [A, 1], paper_literal onto [0, A*(1-A)]. A constant row
    (max - min within 1e-12) maps to all-ones in every mode.
    """
    a = _check_affection_rate(affection_rate)
    if w.ndim != 1 or w.shape[0] < 1:
        raise ShapeError(f"expected a weight row [K], got {w.shape}")
    lo = float(np.min(w))
    hi = float(np.max(w))
    if hi - lo <= _DEGENERATE_EPS:
        return np.ones_like(w)
    base, span = _mode_span(a, mode)
    ratio = (w - lo) / (hi - lo)
    return base + ratio * span


def normalize_affection_backward(w: np.ndarray, affection_rate: float, mode: str,
                                 grad_hat: np.ndarray) -> np.ndarray:
    """Gradient of normalize_affection w.r.t. the raw row.

    min/max subgradients route to the first-occurring extreme element; the
    degenerate all-ones branch is constant, so its gradient is zero.
    """
    a = _check_affection_rate(affection_rate)
    lo = float(np.min(w))
    hi = float(np.max(w))
    if hi - lo <= _DEGENERATE_EPS:
        return np.zeros_like(w)
    base, span = _mode_span(a, mode)
    rng = hi - lo
    g = span / rng
    total = tensor.strict_sum(grad_hat)
    weighted = tensor.strict_sum(grad_hat * (w - lo))
    grad = g * grad_hat
    grad[np.argmin(w)] -= g * total + (span / rng**2) * (-weighted)
    grad[np.argmax(w)] -= (span / rng**2) * weighted
    return grad


class ClassRegBlock:
    """Stateful excitation block; one training thread per instance."""

    def __init__(self, name: str, feature_dim: int, channels: int, classes: int,
                 affection_rate: float = 0.75, mode: str = "straddle", seed: int = 0):
        self.name = name
        self.feature_dim = feature_dim
        self.channels = channels
        self.classes = classes
        self.affection_rate = _check_affection_rate(affection_rate)
        if mode not in NORM_MODES:
            raise ConfigError(f"unknown normalization mode {mode!r}; expected one of {NORM_MODES}")
        self.mode = mode
        self.proj = Conv3dLayer(f"{name}.proj", feature_dim, channels,
                                kernel=(1, 1, 1), seed=seed)
        assert self.proj.kernel == (1, 1, 1)
        self.snapshot: ClassifierSnapshot | None = None
        self._cache = None

    def parameters(self):
        return self.proj.parameters()

    def out_shape(self, in_shape):
        if len(in_shape) != 4 or in_shape[0] != self.channels:
            raise ShapeError(
                f"{self.name}: expected [{self.channels},F,H,W] input, got {tuple(in_shape)}"
            )
        return tuple(in_shape)

    def refresh_snapshot(self, classifier_weights: np.ndarray) -> None:
        self.snapshot = ClassifierSnapshot(classifier_weights)

    # -- sub-operations ---------------------------------------------------

    def map_classifier_weights(self, snap: ClassifierSnapshot) -> np.ndarray:
        """Apply the pointwise conv to the snapshot rows: [CL,D] -> [CL,K]."""
        cl, d = snap.weights.shape
        if d != self.feature_dim:
            raise ShapeError(
                f"{self.name}: snapshot feature dim {d} != projection input {self.feature_dim}"
            )
        volume = snap.weights.reshape(cl, d, 1, 1, 1)
        return self.proj.forward(volume).reshape(cl, self.channels)

    # -- forward / backward ------------------------------------------------

    def forward(self, a: np.ndarray) -> np.ndarray:
        if self.snapshot is None:
            raise StateError(f"{self.name}: forward called without a classifier snapshot")
        if a.ndim != 5 or a.shape[1] != self.channels:
            raise ShapeError(
                f"{self.name}: expected [N,{self.channels},F,H,W], got {a.shape}"
            )
        pooled = global_avg_pool_stfw(a)
        w_i = self.map_classifier_weights(self.snapshot)
        z = class_logits(w_i, pooled)
        selected = select_class(z)
        w_hat = np.empty((a.shape[0], self.channels))
        for n in range(a.shape[0]):
            w_hat[n] = normalize_affection(w_i[selected[n]], self.affection_rate, self.mode)
        out = a * w_hat[:, :, None, None, None]
        self._cache = (a, w_i, z, selected, w_hat, out)
        return out

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        if self._cache is None:
            raise StateError(f"{self.name}: backward called before forward")
        a, w_i, _, selected, w_hat, _ = self._cache
        if grad_out.shape != a.shape:
            raise ShapeError(
                f"{self.name}: grad_out shape {grad_out.shape} != activations {a.shape}"
            )
        grad_a = grad_out * w_hat[:, :, None, None, None]

        n, k = a.shape[0], self.channels
        spatial = a.shape[2] * a.shape[3] * a.shape[4]
        grad_hat = tensor.strict_sum_axis_last(
            np.ascontiguousarray(grad_out * a).reshape(n, k, spatial)
        )
        grad_wi = np.zeros_like(w_i)
        for i in range(n):  # sample order fixed
            grad_wi[selected[i]] += normalize_affection_backward(
                w_i[selected[i]], self.affection_rate, self.mode, grad_hat[i]
            )
        # pointwise-conv parameters receive the row gradients; the returned
        # snapshot gradient is dropped by contract
        self.proj.backward(grad_wi.reshape(self.classes, k, 1, 1, 1))
        return grad_a

    # -- cached-state accessors (saliency, agreement metric) ---------------

    @property
    def last_selected(self) -> np.ndarray:
        if self._cache is None:
            raise StateError(f"{self.name}: no forward pass cached")
        return self._cache[3]

    @property
    def last_weights(self) -> np.ndarray:
        if self._cache is None:
            raise StateError(f"{self.name}: no forward pass cached")
        return self._cache[1]

    @property
    def last_output(self) -> np.ndarray:
        if self._cache is None:
            raise StateError(f"{self.name}: no forward pass cached")
        return self._cache[5]

    def class_probabilities(self) -> np.ndarray:
        """Softmax of the cached class scores (diagnostic view)."""
        if self._cache is None:
            raise StateError(f"{self.name}: no forward pass cached")
        return softmax(self._cache[2])
