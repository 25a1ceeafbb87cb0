"""Run configuration: a strict, versioned JSON schema.

Unknown keys are rejected everywhere so typos fail loudly. All defaults
live in this module (see DEFAULT_CONFIG for the documented baseline run).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .data import ClipSpec
from .errors import ConfigError
from .network import BlockPlacement, NetworkSpec
from .train import TrainConfig

SCHEMA_VERSION = 1

DEFAULT_CONFIG: dict = {
    "schema_version": SCHEMA_VERSION,
    "dataset": {
        "frames": 8,
        "height": 16,
        "width": 16,
        "channels": 1,
        "classes": 5,
        "noise": 3.4,
        "seed": 1234,
        "n_train": 500,
        "n_val": 200,
    },
    "network": {
        "layers": [
            {"type": "conv3d", "out_channels": 8, "kernel": [3, 3, 3],
             "stride": [1, 1, 1], "padding": [1, 1, 1]},
            {"type": "relu"},
            {"type": "avgpool3d", "kernel": [2, 2, 2]},
            {"type": "conv3d", "out_channels": 12, "kernel": [3, 3, 3],
             "stride": [1, 1, 1], "padding": [1, 1, 1]},
            {"type": "relu"},
            {"type": "avgpool3d", "kernel": [2, 2, 2]},
            {"type": "conv3d", "out_channels": 16, "kernel": [3, 3, 3],
             "stride": [1, 1, 1], "padding": [1, 1, 1]},
            {"type": "relu"},
            {"type": "global_avg_pool"},
            {"type": "fc"},
        ],
    },
    "classreg": [
        {"placement": 4, "affection_rate": 0.75, "mode": "straddle"},
        {"placement": 7, "affection_rate": 0.75, "mode": "straddle"},
    ],
    "train": {
        "epochs": 30,
        "batch_size": 16,
        "lr": 0.03,
        "momentum": 0.9,
        "seed": 0,
    },
    "output": {"dir": "runs/default"},
}


@dataclass
class RunConfig:
    dataset: ClipSpec
    n_train: int
    n_val: int
    spec: NetworkSpec
    train: TrainConfig
    output_dir: Path | None
    metrics_path: Path | None
    checkpoint_path: Path | None
    best_checkpoint_path: Path | None
    normalized: dict


def _expect_mapping(obj, where: str) -> dict:
    if not isinstance(obj, dict):
        raise ConfigError(f"{where}: expected an object, got {type(obj).__name__}")
    return obj


def _reject_unknown(section: dict, allowed, where: str) -> None:
    unknown = sorted(set(section) - set(allowed))
    if unknown:
        raise ConfigError(f"{where}: unknown keys {unknown}")


def _get_int(section: dict, key: str, where: str, default=None, minimum=None):
    if key not in section:
        if default is None:
            raise ConfigError(f"{where}: missing required key {key!r}")
        return default
    value = section[key]
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{where}.{key}: expected an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise ConfigError(f"{where}.{key}: must be >= {minimum}, got {value}")
    return value


def _get_float(section: dict, key: str, where: str, default=None):
    if key not in section:
        if default is None:
            raise ConfigError(f"{where}: missing required key {key!r}")
        return default
    value = section[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where}.{key}: expected a number, got {value!r}")
    return float(value)


def _get_str(section: dict, key: str, where: str, default=None):
    if key not in section:
        if default is None:
            raise ConfigError(f"{where}: missing required key {key!r}")
        return default
    value = section[key]
    if not isinstance(value, str):
        raise ConfigError(f"{where}.{key}: expected a string, got {value!r}")
    return value


def _get_int_triple(section: dict, key: str, where: str, default=None, minimum=1):
    if key not in section:
        if default is None:
            raise ConfigError(f"{where}: missing required key {key!r}")
        return list(default)
    value = section[key]
    if (not isinstance(value, list) or len(value) != 3
            or any(isinstance(v, bool) or not isinstance(v, int) for v in value)):
        raise ConfigError(f"{where}.{key}: expected a list of 3 integers, got {value!r}")
    if any(v < minimum for v in value):
        raise ConfigError(f"{where}.{key}: entries must be >= {minimum}, got {value}")
    return list(value)


def _parse_dataset(section) -> tuple[ClipSpec, int, int]:
    where = "dataset"
    section = _expect_mapping(section, where)
    allowed = ("frames", "height", "width", "channels", "classes", "noise",
               "seed", "n_train", "n_val")
    _reject_unknown(section, allowed, where)
    d = DEFAULT_CONFIG["dataset"]
    try:
        spec = ClipSpec(
            frames=_get_int(section, "frames", where, d["frames"], 1),
            height=_get_int(section, "height", where, d["height"], 1),
            width=_get_int(section, "width", where, d["width"], 1),
            channels=_get_int(section, "channels", where, d["channels"], 1),
            classes=_get_int(section, "classes", where, d["classes"], 2),
            noise=_get_float(section, "noise", where, d["noise"]),
            seed=_get_int(section, "seed", where, d["seed"]),
        )
    except ConfigError:
        raise
    n_train = _get_int(section, "n_train", where, d["n_train"], 1)
    n_val = _get_int(section, "n_val", where, d["n_val"], 1)
    return spec, n_train, n_val


def _parse_layer(desc, index: int) -> dict:
    where = f"network.layers[{index}]"
    desc = _expect_mapping(desc, where)
    kind = _get_str(desc, "type", where)
    if kind == "conv3d":
        _reject_unknown(desc, ("type", "out_channels", "kernel", "stride", "padding"), where)
        return {
            "type": "conv3d",
            "out_channels": _get_int(desc, "out_channels", where, minimum=1),
            "kernel": _get_int_triple(desc, "kernel", where),
            "stride": _get_int_triple(desc, "stride", where, default=(1, 1, 1)),
            "padding": _get_int_triple(desc, "padding", where, default=(0, 0, 0), minimum=0),
        }
    if kind == "avgpool3d":
        _reject_unknown(desc, ("type", "kernel"), where)
        return {"type": "avgpool3d", "kernel": _get_int_triple(desc, "kernel", where)}
    if kind in ("relu", "global_avg_pool", "fc"):
        _reject_unknown(desc, ("type",), where)
        return {"type": kind}
    raise ConfigError(f"{where}: unknown layer type {kind!r}")


def _parse_classreg(section) -> tuple[BlockPlacement, ...]:
    if not isinstance(section, list):
        raise ConfigError(f"classreg: expected a list, got {type(section).__name__}")
    placements = []
    for i, entry in enumerate(section):
        where = f"classreg[{i}]"
        entry = _expect_mapping(entry, where)
        _reject_unknown(entry, ("placement", "affection_rate", "mode"), where)
        placements.append(BlockPlacement(
            after_layer=_get_int(entry, "placement", where, minimum=0),
            affection_rate=_get_float(entry, "affection_rate", where, 0.75),
            mode=_get_str(entry, "mode", where, "straddle"),
        ))
    return tuple(placements)


def _parse_train(section) -> TrainConfig:
    where = "train"
    section = _expect_mapping(section, where)
    allowed = ("epochs", "batch_size", "lr", "momentum", "seed",
               "lr_decay_every", "lr_decay_factor")
    _reject_unknown(section, allowed, where)
    d = DEFAULT_CONFIG["train"]
    return TrainConfig(
        epochs=_get_int(section, "epochs", where, d["epochs"], 1),
        batch_size=_get_int(section, "batch_size", where, d["batch_size"], 1),
        lr=_get_float(section, "lr", where, d["lr"]),
        momentum=_get_float(section, "momentum", where, d["momentum"]),
        seed=_get_int(section, "seed", where, d["seed"]),
        lr_decay_every=_get_int(section, "lr_decay_every", where, 0, 0),
        lr_decay_factor=_get_float(section, "lr_decay_factor", where, 1.0),
    )


def parse_run_config(doc: dict) -> RunConfig:
    doc = _expect_mapping(doc, "config")
    _reject_unknown(doc, ("schema_version", "dataset", "network", "classreg",
                          "train", "output"), "config")
    version = _get_int(doc, "schema_version", "config")
    if version != SCHEMA_VERSION:
        raise ConfigError(f"schema_version must be {SCHEMA_VERSION}, got {version}")

    clip_spec, n_train, n_val = _parse_dataset(doc.get("dataset", {}))

    net_section = _expect_mapping(doc.get("network", {}), "network")
    _reject_unknown(net_section, ("input", "classes", "layers"), "network")
    if "layers" not in net_section:
        raise ConfigError("network: missing required key 'layers'")
    if not isinstance(net_section["layers"], list) or not net_section["layers"]:
        raise ConfigError("network.layers: expected a non-empty list")
    layers = tuple(_parse_layer(d, i) for i, d in enumerate(net_section["layers"]))

    input_shape = (clip_spec.channels, clip_spec.frames, clip_spec.height, clip_spec.width)
    # optional geometry/classes declarations must agree with the dataset
    if "input" in net_section:
        value = net_section["input"]
        if (not isinstance(value, list) or len(value) != 4
                or any(isinstance(v, bool) or not isinstance(v, int) for v in value)):
            raise ConfigError(f"network.input: expected a list of 4 integers, got {value!r}")
        if tuple(value) != input_shape:
            raise ConfigError(
                f"network.input {value} disagrees with dataset geometry {list(input_shape)}"
            )
    classes = clip_spec.classes
    if "classes" in net_section:
        declared = _get_int(net_section, "classes", "network", minimum=2)
        if declared != classes:
            raise ConfigError(
                f"network.classes {declared} disagrees with dataset classes {classes}"
            )

    placements = _parse_classreg(doc.get("classreg", []))
    spec = NetworkSpec(input_shape, classes, layers, placements)
    train_config = _parse_train(doc.get("train", {}))

    output = doc.get("output", {})
    output = _expect_mapping(output, "output")
    _reject_unknown(output, ("dir", "metrics", "checkpoint", "best_checkpoint"), "output")
    out_dir = Path(output["dir"]) if "dir" in output else None
    if "dir" in output and not isinstance(output["dir"], str):
        raise ConfigError("output.dir: expected a string")

    def _path(key, default_name):
        if key in output:
            if not isinstance(output[key], str):
                raise ConfigError(f"output.{key}: expected a string")
            return Path(output[key])
        return out_dir / default_name if out_dir is not None else None

    normalized = {
        "schema_version": SCHEMA_VERSION,
        "dataset": {
            "frames": clip_spec.frames, "height": clip_spec.height,
            "width": clip_spec.width, "channels": clip_spec.channels,
            "classes": clip_spec.classes, "noise": clip_spec.noise,
            "seed": clip_spec.seed, "n_train": n_train, "n_val": n_val,
        },
        "network": {"input": list(input_shape), "classes": classes,
                    "layers": [dict(l) for l in layers]},
        "classreg": [
            {"placement": p.after_layer, "affection_rate": p.affection_rate,
             "mode": p.mode} for p in placements
        ],
        "train": {
            "epochs": train_config.epochs, "batch_size": train_config.batch_size,
            "lr": train_config.lr, "momentum": train_config.momentum,
            "seed": train_config.seed,
            "lr_decay_every": train_config.lr_decay_every,
            "lr_decay_factor": train_config.lr_decay_factor,
        },
    }

    return RunConfig(
        dataset=clip_spec,
        n_train=n_train,
        n_val=n_val,
        spec=spec,
        train=train_config,
        output_dir=out_dir,
        metrics_path=_path("metrics", "metrics.jsonl"),
        checkpoint_path=_path("checkpoint", "final.crn"),
        best_checkpoint_path=_path("best_checkpoint", "best.crn"),
        normalized=normalized,
    )


def load_run_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return parse_run_config(doc)


def network_spec_from_config(normalized: dict) -> NetworkSpec:
    """Rebuild a NetworkSpec from a normalized config dict (checkpoint meta)."""
    net = normalized["network"]
    placements = tuple(
        BlockPlacement(p["placement"], p["affection_rate"], p["mode"])
        for p in normalized.get("classreg", [])
    )
    return NetworkSpec(tuple(net["input"]), net["classes"],
                       tuple(dict(l) for l in net["layers"]), placements)
