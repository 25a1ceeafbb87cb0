"""Synthetic moving-blob video clips.

Classes are motion patterns of a bright Gaussian blob over uniform noise:
0 up, 1 down, 2 left, 3 right, 4 static, at exactly one pixel per frame.
Labels are assigned round-robin (label = index mod classes), so any
contiguous index range is balanced within one clip per class.

Determinism contract (frozen; see rng module for the recurrence):
  trajectory stream: derive_seed(spec.seed, "clip", index, "traj")
      draw 1: u for start row, draw 2: u for start column; starts are
      quantized to 1/256 px so per-frame centers and grid offsets stay
      exact in float64 (frame t+1 of a noise-free moving clip is a
      bit-exact 1 px shift of frame t).
  noise stream: derive_seed(spec.seed, "clip", index, "noise")
      channels*frames*height*width uniforms u, mapped to zero-mean
      background values (u - 0.5) * noise, row-major (c, f, y, x).
The blob (amplitude 1.0, radius 1.6 px) is added on top of the noise.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, FormatError
from .rng import SplitMix64, derive_seed, uniform_array

LABELS = ("up", "down", "left", "right", "static")
_MOTIONS = ((-1, 0), (1, 0), (0, -1), (0, 1), (0, 0))  # (dy, dx) per class

BLOB_AMPLITUDE = 1.0
BLOB_RADIUS = 1.6
EDGE_MARGIN = 3.0
_START_QUANTUM = 256.0


@dataclass(frozen=True)
class ClipSpec:
    frames: int = 8
    height: int = 16
    width: int = 16
    channels: int = 1
    classes: int = 5
    noise: float = 0.1
    seed: int = 1234

    def __post_init__(self):
        if min(self.frames, self.height, self.width, self.channels) < 1:
            raise ConfigError("clip extents must be >= 1")
        if not 2 <= self.classes <= len(LABELS):
            raise ConfigError(
                f"class count must lie in [2, {len(LABELS)}], got {self.classes}"
            )
        if self.noise < 0:
            raise ConfigError(f"noise amplitude must be >= 0, got {self.noise}")
        for dim, size in (("height", self.height), ("width", self.width)):
            if size <= 2 * EDGE_MARGIN + self.frames - 1:
                raise ConfigError(
                    f"{dim} {size} too small for a {self.frames}-frame trajectory"
                )

    @property
    def shape(self) -> tuple[int, int, int, int]:
        return (self.channels, self.frames, self.height, self.width)


def _start_coordinate(stream: SplitMix64, size: int, steps: int, delta: int) -> float:
    """Start position keeping the whole trajectory >= EDGE_MARGIN from edges."""
    lo = EDGE_MARGIN + max(0.0, -delta * steps)
    hi = (size - 1) - EDGE_MARGIN - max(0.0, delta * steps)
    u = stream.next_f64()
    return math.floor((lo + u * (hi - lo)) * _START_QUANTUM) / _START_QUANTUM


def generate_clip(spec: ClipSpec, index: int) -> tuple[np.ndarray, int]:
    """Clip tensor [C,F,H,W] and its label; pure function of (spec, index)."""
    label = index % spec.classes
    dy, dx = _MOTIONS[label]
    steps = spec.frames - 1

    traj = SplitMix64(derive_seed(spec.seed, "clip", index, "traj"))
    cy0 = _start_coordinate(traj, spec.height, steps, dy)
    cx0 = _start_coordinate(traj, spec.width, steps, dx)

    n_noise = spec.channels * spec.frames * spec.height * spec.width
    clip = (
        uniform_array(derive_seed(spec.seed, "clip", index, "noise"), n_noise)
        .reshape(spec.shape)
        - 0.5
    ) * spec.noise

    inv = -1.0 / (2.0 * BLOB_RADIUS * BLOB_RADIUS)
    ys = np.arange(spec.height, dtype=np.float64)[:, None]
    xs = np.arange(spec.width, dtype=np.float64)[None, :]
    for t in range(spec.frames):
        cy = cy0 + float(dy * t)
        cx = cx0 + float(dx * t)
        blob = BLOB_AMPLITUDE * np.exp(((ys - cy) ** 2 + (xs - cx) ** 2) * inv)
        clip[:, t] += blob[None, :, :]
    return clip, label


def make_split(spec: ClipSpec, n_train: int, n_val: int) -> tuple[range, range]:
    """Disjoint, label-balanced train/val clip index ranges."""
    if n_train < 1 or n_val < 1:
        raise ConfigError("split sizes must be >= 1")
    return range(0, n_train), range(n_train, n_train + n_val)


def generate_dataset(spec: ClipSpec, indices) -> tuple[np.ndarray, np.ndarray]:
    """Stack clips for the given indices: ([n,C,F,H,W], labels [n])."""
    xs = np.empty((len(indices), *spec.shape))
    ys = np.empty(len(indices), dtype=np.int64)
    for row, index in enumerate(indices):
        xs[row], ys[row] = generate_clip(spec, index)
    return xs, ys


def dump_clip(spec: ClipSpec, index: int, out_dir) -> tuple[Path, Path]:
    """Write one clip as raw little-endian f64 plus a JSON sidecar."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    clip, label = generate_clip(spec, index)
    raw = out_dir / f"clip_{index:06d}.f64"
    sidecar = out_dir / f"clip_{index:06d}.json"
    raw.write_bytes(clip.astype("<f8").tobytes())
    sidecar.write_text(
        json.dumps({"index": index, "label": label, "shape": list(clip.shape)}) + "\n"
    )
    return raw, sidecar


def load_clip_dump(raw_path) -> tuple[np.ndarray, int]:
    """Read back a dumped clip; validates size against its sidecar."""
    raw_path = Path(raw_path)
    sidecar = raw_path.with_suffix(".json")
    try:
        meta = json.loads(sidecar.read_text())
        shape = tuple(int(s) for s in meta["shape"])
        label = int(meta["label"])
    except (OSError, ValueError, KeyError) as exc:
        raise FormatError(f"bad clip sidecar {sidecar}: {exc}") from exc
    data = np.frombuffer(raw_path.read_bytes(), dtype="<f8")
    expected = int(np.prod(shape))
    if data.size != expected:
        raise FormatError(
            f"clip {raw_path} holds {data.size} values, sidecar says {expected}"
        )
    return data.reshape(shape).astype(np.float64), label
