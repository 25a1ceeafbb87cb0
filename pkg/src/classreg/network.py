"""Host network assembly: ordered layers plus optional excitation blocks.

NetworkSpec is the validated, declarative form (it shape-propagates at
construction); Network is the runnable instance. Blocks are inserted after
the host layer named by their placement index and share one classifier
snapshot refreshed by the caller once per iteration.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .block import NORM_MODES, ClassRegBlock
from .errors import ConfigError, ShapeError
from .layers import (
    AvgPool3dLayer,
    Conv3dLayer,
    FcLayer,
    GlobalAvgPoolLayer,
    ReluLayer,
)

LAYER_TYPES = ("conv3d", "relu", "avgpool3d", "global_avg_pool", "fc")


@dataclass(frozen=True)
class BlockPlacement:
    """One excitation block: inserted after host layer `after_layer`."""

    after_layer: int
    affection_rate: float = 0.75
    mode: str = "straddle"

    def __post_init__(self):
        if not 0.0 < self.affection_rate <= 1.0:
            raise ConfigError(
                f"affection rate must lie in (0, 1], got {self.affection_rate}"
            )
        if self.mode not in NORM_MODES:
            raise ConfigError(f"unknown mode {self.mode!r}; expected one of {NORM_MODES}")


@dataclass(frozen=True)
class NetworkSpec:
    """Input geometry [C,F,H,W], class count, and ordered layer descriptors."""

    input_shape: tuple[int, int, int, int]
    classes: int
    layers: tuple[dict, ...]
    placements: tuple[BlockPlacement, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if len(self.input_shape) != 4 or any(s < 1 for s in self.input_shape):
            raise ConfigError(f"input geometry must be 4 positive extents, got {self.input_shape}")
        if self.classes < 2:
            raise ConfigError(f"class count must be >= 2, got {self.classes}")
        self.propagate()  # raises ConfigError on any inconsistency

    def without_blocks(self) -> "NetworkSpec":
        return NetworkSpec(self.input_shape, self.classes, self.layers, ())

    def propagate(self) -> list[tuple[int, ...]]:
        """Shape after every layer; validates layer list and placements."""
        if not self.layers or self.layers[-1].get("type") != "fc":
            raise ConfigError("layer list must end with the fc classifier")
        shapes = []
        shape: tuple[int, ...] = tuple(self.input_shape)
        conv_seen = False
        try:
            for i, desc in enumerate(self.layers):
                kind = desc.get("type")
                if kind not in LAYER_TYPES:
                    raise ConfigError(f"layer {i}: unknown type {kind!r}")
                if kind == "fc" and i != len(self.layers) - 1:
                    raise ConfigError("fc must be the final layer")
                layer = _build_layer(f"layer{i}", desc, shape, self.classes, seed=0)
                shape = layer.out_shape(shape)
                conv_seen = conv_seen or kind == "conv3d"
                shapes.append(shape)
        except ShapeError as exc:
            raise ConfigError(f"shape propagation failed: {exc}") from exc
        for p in self.placements:
            if not 0 <= p.after_layer < len(self.layers):
                raise ConfigError(f"block placement {p.after_layer} out of range")
            kind = self.layers[p.after_layer]["type"]
            if kind not in ("conv3d", "relu"):
                raise ConfigError(
                    f"block placement {p.after_layer} must follow a conv block, not {kind}"
                )
            if not any(d["type"] == "conv3d" for d in self.layers[: p.after_layer + 1]):
                raise ConfigError(
                    f"block placement {p.after_layer} has no preceding conv3d layer"
                )
            if len(shapes[p.after_layer]) != 4:
                raise ConfigError(
                    f"block placement {p.after_layer} sits on a non-spatio-temporal activation"
                )
        return shapes

    def feature_dim(self) -> int:
        """Channel count entering the fc classifier."""
        return self.propagate()[-2][0]

    def canonical_json(self) -> str:
        doc = {
            "input": list(self.input_shape),
            "classes": self.classes,
            "layers": [dict(sorted(d.items())) for d in self.layers],
            "placements": [
                {"after_layer": p.after_layer, "affection_rate": p.affection_rate, "mode": p.mode}
                for p in self.placements
            ],
        }
        return json.dumps(doc, sort_keys=True, separators=(",", ":"))

    def digest(self) -> str:
        return hashlib.sha256(self.canonical_json().encode("utf-8")).hexdigest()


def _build_layer(name, desc, in_shape, classes, seed):
    kind = desc["type"]
    if kind == "conv3d":
        return Conv3dLayer(
            name,
            in_channels=in_shape[0],
            out_channels=desc["out_channels"],
            kernel=desc["kernel"],
            stride=desc.get("stride", (1, 1, 1)),
            padding=desc.get("padding", (0, 0, 0)),
            seed=seed,
        )
    if kind == "relu":
        return ReluLayer(name)
    if kind == "avgpool3d":
        return AvgPool3dLayer(name, desc["kernel"])
    if kind == "global_avg_pool":
        return GlobalAvgPoolLayer(name)
    if kind == "fc":
        if len(in_shape) != 1:
            raise ShapeError(
                f"{name}: classifier needs flat features, got shape {tuple(in_shape)}"
            )
        return FcLayer(name, in_features=in_shape[0], classes=classes, seed=seed)
    raise ConfigError(f"unknown layer type {kind!r}")


class Network:
    """Runnable network: layers plus inserted blocks, in execution order."""

    def __init__(self, spec: NetworkSpec, seed: int = 0):
        self.spec = spec
        self.seed = seed
        shapes = spec.propagate()
        feature_dim = shapes[-2][0] if len(shapes) >= 2 else 0

        by_placement = {}
        for j, p in enumerate(sorted(spec.placements, key=lambda q: q.after_layer)):
            k = shapes[p.after_layer][0]
            by_placement.setdefault(p.after_layer, []).append(
                ClassRegBlock(
                    f"block{j}",
                    feature_dim=feature_dim,
                    channels=k,
                    classes=spec.classes,
                    affection_rate=p.affection_rate,
                    mode=p.mode,
                    seed=seed,
                )
            )

        self.modules = []
        shape = tuple(spec.input_shape)
        for i, desc in enumerate(spec.layers):
            layer = _build_layer(f"layer{i}", desc, shape, spec.classes, seed)
            shape = layer.out_shape(shape)
            self.modules.append(layer)
            if desc["type"] == "fc":
                self.classifier = layer
            for blk in by_placement.get(i, ()):
                self.modules.append(blk)
        self.blocks = [m for m in self.modules if isinstance(m, ClassRegBlock)]

    def parameters(self):
        params = []
        for m in self.modules:
            params.extend(m.parameters())
        return params

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.zero_grad()

    def refresh_snapshots(self) -> None:
        """Copy the live classifier weights into every block (detached)."""
        for blk in self.blocks:
            blk.refresh_snapshot(self.classifier.weights.value)

    def forward(self, x: np.ndarray) -> np.ndarray:
        out = x
        for m in self.modules:
            out = m.forward(out)
        return out

    def backward(self, grad_logits: np.ndarray) -> np.ndarray:
        grad = grad_logits
        for m in reversed(self.modules):
            grad = m.backward(grad)
        return grad

    def state_entries(self) -> dict[str, np.ndarray]:
        return {p.name: p.value for p in self.parameters()}

    def load_state_entries(self, entries: dict[str, np.ndarray]) -> None:
        own = {p.name: p for p in self.parameters()}
        missing = sorted(set(own) - set(entries))
        extra = sorted(set(entries) - set(own))
        if missing or extra:
            raise ShapeError(
                f"parameter names do not match network (missing {missing}, extra {extra})"
            )
        for name, param in own.items():
            value = entries[name]
            if value.shape != param.value.shape:
                raise ShapeError(
                    f"{name}: stored shape {value.shape} != expected {param.value.shape}"
                )
            param.value[...] = value
