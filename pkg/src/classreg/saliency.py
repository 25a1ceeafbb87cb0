"""Per-block class-specific saliency export.

A saliency volume is the channel-weighted sum of a block's class-excited
activations: channels of the cached block output are weighted by the
affection-normalized weight row of the requested class, summed, clamped at
zero and max-normalized. Volumes are rendered as one binary PGM (P5) file
per frame after nearest-neighbor upsampling, plus an index JSON.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .block import ClassRegBlock, normalize_affection
from .errors import FormatError, InputError, ShapeError, StateError


@dataclass
class SaliencyMap:
    block_id: int
    class_index: int
    volume: np.ndarray  # [F,H,W], scores >= 0, max 1 unless identically 0
    source_shape: tuple[int, int, int]


def compute_block_saliency(block: ClassRegBlock, class_index: int | None = None,
                           block_id: int = 0) -> SaliencyMap:
    """Saliency of the block's cached single-clip forward pass.

    With class_index None, the block's own selected class is used.
    """
    excited = block.last_output  # raises StateError when nothing is cached
    if excited.shape[0] != 1:
        raise StateError("saliency needs a single-clip (N=1) forward pass")
    if class_index is None:
        class_index = int(block.last_selected[0])
    if not 0 <= class_index < block.classes:
        raise InputError(
            f"class index {class_index} out of range [0, {block.classes})"
        )
    weights = normalize_affection(
        block.last_weights[class_index], block.affection_rate, block.mode
    )
    volume = np.zeros(excited.shape[2:])
    for k in range(block.channels):  # channel order fixed
        volume += weights[k] * excited[0, k]
    volume = np.maximum(volume, 0.0)
    peak = float(volume.max())
    if peak > 0.0:
        volume = volume / peak
    return SaliencyMap(
        block_id=block_id,
        class_index=class_index,
        volume=volume,
        source_shape=excited.shape[2:],
    )


def upsample_nearest(volume: np.ndarray, target: tuple[int, int, int]) -> np.ndarray:
    """Nearest-neighbor upsample per axis: source index = (t * src) // dst."""
    if len(target) != 3:
        raise ShapeError(f"target must be [F,H,W], got {target}")
    for t, s in zip(target, volume.shape):
        if t < s:
            raise ShapeError(f"target extents {target} must be >= map extents {volume.shape}")
    out = volume
    for axis, (t, s) in enumerate(zip(target, volume.shape)):
        idx = (np.arange(t) * s) // t
        out = np.take(out, idx, axis=axis)
    return out


def quantize(volume: np.ndarray) -> np.ndarray:
    """score*255 rounded half-up into uint8."""
    return np.clip(np.floor(volume * 255.0 + 0.5), 0, 255).astype(np.uint8)


def write_pgm(path, image: np.ndarray) -> None:
    if image.ndim != 2 or image.dtype != np.uint8:
        raise ShapeError("PGM writer expects a 2-D uint8 image")
    h, w = image.shape
    header = f"P5\n{w} {h}\n255\n".encode("ascii")
    Path(path).write_bytes(header + image.tobytes())


def read_pgm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    parts = data.split(b"\n", 3)
    if len(parts) != 4 or parts[0] != b"P5":
        raise FormatError(f"{path}: not a binary P5 PGM")
    try:
        w, h = (int(v) for v in parts[1].split())
        maxval = int(parts[2])
    except ValueError as exc:
        raise FormatError(f"{path}: bad PGM header") from exc
    if maxval != 255:
        raise FormatError(f"{path}: unsupported maxval {maxval}")
    raw = parts[3]
    if len(raw) != w * h:
        raise FormatError(f"{path}: expected {w * h} pixels, got {len(raw)}")
    return np.frombuffer(raw, dtype=np.uint8).reshape(h, w)


def export_frames(smap: SaliencyMap, upsample_to: tuple[int, int, int],
                  out_dir, prefix: str = "saliency") -> list[Path]:
    """One PGM per frame, named <prefix>_b<block>_c<class>_f<frame>.pgm."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    volume = upsample_nearest(smap.volume, tuple(upsample_to))
    quantized = quantize(volume)
    paths = []
    records = []
    for f in range(quantized.shape[0]):
        name = f"{prefix}_b{smap.block_id}_c{smap.class_index}_f{f}.pgm"
        write_pgm(out_dir / name, quantized[f])
        paths.append(out_dir / name)
        records.append({
            "path": name,
            "block": smap.block_id,
            "class": smap.class_index,
            "frame": f,
        })
    index_path = out_dir / f"{prefix}_index.json"
    existing = []
    if index_path.exists():
        try:
            existing = json.loads(index_path.read_text()).get("files", [])
        except (ValueError, AttributeError):
            existing = []
    known = {r["path"] for r in records}
    merged = [r for r in existing if r.get("path") not in known] + records
    index_path.write_text(json.dumps(
        {"files": merged, "shape": list(upsample_to)}, indent=2
    ) + "\n")
    return paths
