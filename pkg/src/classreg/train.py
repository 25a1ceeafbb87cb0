"""Training and evaluation harness.

Every run is a pure function of (config, seed): weights come from
per-parameter-name streams, batch order from a per-epoch shuffle stream,
and the dataset from the clip spec. The classifier snapshot feeding the
excitation blocks is refreshed exactly once per iteration, before the
forward pass, so blocks always see the weights produced by the previous
iteration.

Per-epoch metrics: train_loss is the running mean of batch losses during
the epoch; train_top1 and val_top1 are frozen post-epoch evaluations, so
re-evaluating a saved checkpoint on the same split reproduces them
exactly. block_agreement[b] is the fraction of val samples whose block-b
selected class equals the network's final prediction.
"""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .checkpoint import save_checkpoint
from .data import generate_dataset, make_split
from .errors import ConfigError
from .layers import cross_entropy_loss, sgd_momentum_step, softmax
from .network import Network
from .rng import SplitMix64, derive_seed


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 30
    batch_size: int = 16
    lr: float = 0.03
    momentum: float = 0.9
    seed: int = 0
    lr_decay_every: int = 0  # epochs between decays; 0 keeps lr constant
    lr_decay_factor: float = 1.0

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.lr <= 0:
            raise ConfigError(f"lr must be > 0, got {self.lr}")
        if not 0.0 <= self.momentum < 1.0:
            raise ConfigError(f"momentum must lie in [0, 1), got {self.momentum}")
        if self.lr_decay_every and not 0.0 < self.lr_decay_factor <= 1.0:
            raise ConfigError(
                f"lr_decay_factor must lie in (0, 1], got {self.lr_decay_factor}"
            )


@dataclass
class EpochMetrics:
    epoch: int
    train_loss: float
    train_top1: float
    val_top1: float
    wall_seconds: float
    block_agreement: list[float] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=False)


@dataclass
class EvalResult:
    top1: float
    block_agreement: list[float]
    predictions: np.ndarray


@dataclass
class TrainResult:
    network: Network
    metrics: list[EpochMetrics]
    best_epoch: int
    best_val_top1: float


def evaluate(net: Network, xs: np.ndarray, ys: np.ndarray, batch_size: int = 32) -> EvalResult:
    """Deterministic forward-only pass; snapshots refreshed once up front."""
    net.refresh_snapshots()
    n = xs.shape[0]
    preds = np.empty(n, dtype=np.int64)
    agree_counts = np.zeros(len(net.blocks), dtype=np.int64)
    for start in range(0, n, batch_size):
        stop = min(start + batch_size, n)
        logits = net.forward(xs[start:stop])
        batch_preds = np.argmax(logits, axis=1)
        preds[start:stop] = batch_preds
        for b, blk in enumerate(net.blocks):
            agree_counts[b] += int(np.count_nonzero(blk.last_selected == batch_preds))
    top1 = float(np.count_nonzero(preds == ys)) / n
    agreement = [float(c) / n for c in agree_counts]
    return EvalResult(top1=top1, block_agreement=agreement, predictions=preds)


def _shuffled_indices(seed: int, epoch: int, n: int) -> list[int]:
    order = list(range(n))
    SplitMix64(derive_seed(seed, "shuffle", epoch)).shuffle(order)
    return order


def train(run, use_classreg: bool = True, seed: int | None = None,
          hook=None, write_outputs: bool = True) -> TrainResult:
    """Run one training job described by a RunConfig.

    `hook(phase, iteration, net)` is called with phase "pre_forward" right
    after the snapshot refresh and "post_step" after the optimizer update;
    it exists for instrumentation (snapshot-contract assertions) and is
    never required.
    """
    cfg: TrainConfig = run.train
    seed = cfg.seed if seed is None else seed

    spec = run.spec if use_classreg else run.spec.without_blocks()
    net = Network(spec, seed=seed)

    train_idx, val_idx = make_split(run.dataset, run.n_train, run.n_val)
    train_x, train_y = generate_dataset(run.dataset, train_idx)
    val_x, val_y = generate_dataset(run.dataset, val_idx)

    metrics_path = run.metrics_path if write_outputs else None
    if metrics_path is not None:
        Path(metrics_path).parent.mkdir(parents=True, exist_ok=True)
        Path(metrics_path).write_text("")  # truncate previous runs

    params = net.parameters()
    metrics: list[EpochMetrics] = []
    best_epoch, best_top1 = -1, -1.0
    lr = cfg.lr
    iteration = 0
    for epoch in range(cfg.epochs):
        t0 = time.perf_counter()
        if cfg.lr_decay_every and epoch > 0 and epoch % cfg.lr_decay_every == 0:
            lr *= cfg.lr_decay_factor
        order = _shuffled_indices(seed, epoch, len(train_x))
        loss_sum = 0.0
        for start in range(0, len(order), cfg.batch_size):
            batch = order[start:start + cfg.batch_size]
            xb = np.ascontiguousarray(train_x[batch])
            yb = train_y[batch]
            net.refresh_snapshots()
            if hook is not None:
                hook("pre_forward", iteration, net)
            logits = net.forward(xb)
            probs = softmax(logits)
            loss, dlogits = cross_entropy_loss(probs, yb)
            loss_sum += loss * len(batch)
            net.zero_grad()
            net.backward(dlogits)
            for p in params:
                sgd_momentum_step(p.value, p.grad, p.velocity, lr, cfg.momentum)
            if hook is not None:
                hook("post_step", iteration, net)
            iteration += 1

        train_eval = evaluate(net, train_x, train_y, cfg.batch_size)
        val_eval = evaluate(net, val_x, val_y, cfg.batch_size)
        em = EpochMetrics(
            epoch=epoch,
            train_loss=loss_sum / len(train_x),
            train_top1=train_eval.top1,
            val_top1=val_eval.top1,
            wall_seconds=time.perf_counter() - t0,
            block_agreement=val_eval.block_agreement,
        )
        metrics.append(em)
        if metrics_path is not None:
            with open(metrics_path, "a") as fh:
                fh.write(em.to_json() + "\n")

        meta = {
            "config": run.normalized,
            "use_classreg": use_classreg,
            "seed": seed,
            "epoch": epoch,
            "network_hash": spec.digest(),
            "metrics": asdict(em),
        }
        if write_outputs and run.checkpoint_path is not None:
            save_checkpoint(run.checkpoint_path, net, meta)
        if val_eval.top1 > best_top1:
            best_epoch, best_top1 = epoch, val_eval.top1
            if write_outputs and run.best_checkpoint_path is not None:
                save_checkpoint(run.best_checkpoint_path, net, meta)

    return TrainResult(network=net, metrics=metrics,
                       best_epoch=best_epoch, best_val_top1=best_top1)


def paired_comparison(run, seeds) -> dict:
    """Train baseline and excited variants from identical initial weights
    and identical batch order for each seed; returns a JSON-ready report."""
    rows = []
    for seed in seeds:
        base = train(run, use_classreg=False, seed=seed, write_outputs=False)
        reg = train(run, use_classreg=True, seed=seed, write_outputs=False)
        rows.append({
            "seed": int(seed),
            "baseline_top1": base.metrics[-1].val_top1,
            "classreg_top1": reg.metrics[-1].val_top1,
            "delta": reg.metrics[-1].val_top1 - base.metrics[-1].val_top1,
        })
    n = len(rows)
    report = {
        "seeds": rows,
        "mean_baseline_top1": sum(r["baseline_top1"] for r in rows) / n,
        "mean_classreg_top1": sum(r["classreg_top1"] for r in rows) / n,
        "mean_delta": sum(r["delta"] for r in rows) / n,
        "classreg_wins": sum(1 for r in rows if r["delta"] > 0),
    }
    return report
