"""Bit-exact binary checkpoints (format "CRN1").

Layout, all little-endian:

    magic   4 bytes  b"CRN1"
    version u32      1
    count   u32      number of tensor entries
    entry*  u16 name length, UTF-8 name, u8 rank, rank x u32 extents,
            product-of-extents x f64 values
    meta    u32 byte length, UTF-8 JSON

Writes go through a temp file and os.replace, so readers never observe a
partial checkpoint.
"""

from __future__ import annotations

import json
import os
import struct
from pathlib import Path

import numpy as np

from .errors import FormatError

MAGIC = b"CRN1"
VERSION = 1


def write_entries(path, entries: dict[str, np.ndarray], meta: dict) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    blob = bytearray()
    blob += MAGIC
    blob += struct.pack("<II", VERSION, len(entries))
    seen = set()
    for name, value in entries.items():
        if name in seen:
            raise FormatError(f"duplicate entry name {name!r}")
        seen.add(name)
        encoded = name.encode("utf-8")
        arr = np.ascontiguousarray(value, dtype=np.float64)
        if arr.ndim > 255:
            raise FormatError(f"{name}: rank {arr.ndim} exceeds format limit")
        blob += struct.pack("<H", len(encoded))
        blob += encoded
        blob += struct.pack("<B", arr.ndim)
        for extent in arr.shape:
            blob += struct.pack("<I", extent)
        blob += arr.astype("<f8").tobytes()
    meta_bytes = json.dumps(meta, sort_keys=True).encode("utf-8")
    blob += struct.pack("<I", len(meta_bytes))
    blob += meta_bytes

    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(bytes(blob))
    os.replace(tmp, path)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise FormatError(
                f"truncated checkpoint: wanted {n} bytes at offset {self.pos}, "
                f"file has {len(self.data)}"
            )
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def u8(self) -> int:
        return self.take(1)[0]

    def u16(self) -> int:
        return struct.unpack("<H", self.take(2))[0]

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]


def read_entries(path) -> tuple[dict[str, np.ndarray], dict]:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise FormatError(f"cannot read checkpoint {path}: {exc}") from exc
    r = _Reader(data)
    if r.take(4) != MAGIC:
        raise FormatError(f"{path}: bad magic, not a CRN1 checkpoint")
    version = r.u32()
    if version != VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    count = r.u32()
    entries: dict[str, np.ndarray] = {}
    for _ in range(count):
        name_len = r.u16()
        try:
            name = r.take(name_len).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise FormatError(f"{path}: undecodable entry name") from exc
        if name in entries:
            raise FormatError(f"{path}: duplicate entry name {name!r}")
        rank = r.u8()
        shape = tuple(r.u32() for _ in range(rank))
        n_values = 1
        for extent in shape:
            if extent < 1:
                raise FormatError(f"{path}: entry {name!r} has extent {extent}")
            n_values *= extent
        raw = r.take(8 * n_values)
        entries[name] = np.frombuffer(raw, dtype="<f8").reshape(shape).copy()
    meta_len = r.u32()
    meta_raw = r.take(meta_len)
    if r.pos != len(data):
        raise FormatError(f"{path}: {len(data) - r.pos} trailing bytes")
    try:
        meta = json.loads(meta_raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"{path}: bad metadata JSON: {exc}") from exc
    return entries, meta


def save_checkpoint(path, network, meta: dict) -> None:
    """Persist a network's parameters plus metadata."""
    write_entries(path, network.state_entries(), meta)


def load_checkpoint(path):
    """Rebuild the network a checkpoint was saved from: (network, meta).

    The metadata must carry the run config (under "config") and the init
    seed that `save_checkpoint` callers store.
    """
    from .config import network_spec_from_config  # deferred: config imports us

    entries, meta = read_entries(path)
    try:
        spec = network_spec_from_config(meta["config"])
        seed = int(meta["seed"])
    except (KeyError, TypeError) as exc:
        raise FormatError(f"{path}: metadata missing run config: {exc}") from exc
    from .network import Network

    net = Network(spec, seed=seed)
    try:
        net.load_state_entries(entries)
    except Exception as exc:
        raise FormatError(f"{path}: parameters do not match metadata spec: {exc}") from exc
    return net, meta
