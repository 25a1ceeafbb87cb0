"""Command-line interface.

Subcommands: train, compare, eval, saliency, flops, bench. Every command
prints a human-readable table followed by the same numbers as a JSON
document on stdout. Exit codes: 0 success, 1 runtime error, 2 config
error; failures emit one machine-parseable line on stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict

from . import backend
from .checkpoint import load_checkpoint
from .config import load_run_config
from .data import generate_clip, generate_dataset, make_split
from .errors import ClassRegError, ConfigError, InputError
from .profiling import bench_pair, count_flops
from .saliency import compute_block_saliency, export_frames
from .train import evaluate, paired_comparison, train


def _print_table(columns: list[str], rows: list[list], title: str | None = None) -> None:
    if title:
        print(title)
    cells = [[str(c) for c in row] for row in rows]
    widths = [max(len(col), *(len(r[i]) for r in cells)) if cells else len(col)
              for i, col in enumerate(columns)]
    print("  ".join(col.ljust(w) for col, w in zip(columns, widths)))
    print("  ".join("-" * w for w in widths))
    for row in cells:
        print("  ".join(cell.ljust(w) for cell, w in zip(row, widths)))


def _print_json(doc: dict) -> None:
    print()
    print(json.dumps(doc, indent=2, sort_keys=False))


def _cmd_train(args) -> int:
    run = load_run_config(args.config)
    if run.output_dir is None and run.metrics_path is None:
        raise ConfigError("config has no output section; nowhere to write results")
    use_classreg = not args.no_classreg
    result = train(run, use_classreg=use_classreg, seed=args.seed)
    rows = [[m.epoch, f"{m.train_loss:.6f}", f"{m.train_top1:.4f}", f"{m.val_top1:.4f}"]
            for m in result.metrics]
    _print_table(["epoch", "train_loss", "train_top1", "val_top1"], rows,
                 title=f"training ({'classreg' if use_classreg else 'baseline'})")
    last = result.metrics[-1]
    _print_json({
        "variant": "classreg" if use_classreg else "baseline",
        "epochs": len(result.metrics),
        "final": asdict(last),
        "best_epoch": result.best_epoch,
        "best_val_top1": result.best_val_top1,
        "metrics_path": str(run.metrics_path),
        "checkpoint_path": str(run.checkpoint_path),
        "backend": backend.get_backend(),
    })
    return 0


def _cmd_compare(args) -> int:
    run = load_run_config(args.config)
    if args.seeds < 1:
        raise ConfigError(f"--seeds must be >= 1, got {args.seeds}")
    seeds = [run.train.seed + i for i in range(args.seeds)]
    report = paired_comparison(run, seeds)
    rows = [[r["seed"], f"{r['baseline_top1']:.4f}", f"{r['classreg_top1']:.4f}",
             f"{r['delta']:+.4f}"] for r in report["seeds"]]
    rows.append(["mean", f"{report['mean_baseline_top1']:.4f}",
                 f"{report['mean_classreg_top1']:.4f}", f"{report['mean_delta']:+.4f}"])
    _print_table(["seed", "baseline", "classreg", "delta"], rows,
                 title="paired comparison (val top-1)")
    _print_json(report)
    return 0


def _cmd_eval(args) -> int:
    net, meta = load_checkpoint(args.checkpoint)
    run = load_run_config(args.config)
    ckpt_input = tuple(meta["config"]["network"]["input"])
    if ckpt_input != tuple(run.spec.input_shape) or \
            meta["config"]["network"]["classes"] != run.spec.classes:
        raise ConfigError(
            f"checkpoint architecture (input {list(ckpt_input)}, "
            f"{meta['config']['network']['classes']} classes) does not match "
            f"config dataset geometry {list(run.spec.input_shape)}"
        )
    _, val_idx = make_split(run.dataset, run.n_train, run.n_val)
    xs, ys = generate_dataset(run.dataset, val_idx)
    result = evaluate(net, xs, ys, run.train.batch_size)
    rows = [["val_top1", f"{result.top1:.4f}"]]
    for b, agreement in enumerate(result.block_agreement):
        rows.append([f"block{b}_agreement", f"{agreement:.4f}"])
    _print_table(["metric", "value"], rows, title="evaluation")
    _print_json({
        "val_top1": result.top1,
        "block_agreement": result.block_agreement,
        "n_val": len(ys),
        "checkpoint_epoch": meta.get("epoch"),
    })
    return 0


def _cmd_saliency(args) -> int:
    net, meta = load_checkpoint(args.checkpoint)
    if not net.blocks:
        raise InputError("checkpoint network has no excitation blocks")
    if args.class_spec != "auto":
        try:
            requested = int(args.class_spec)
        except ValueError:
            raise ConfigError(
                f"--class must be an integer or 'auto', got {args.class_spec!r}"
            ) from None
    else:
        requested = None

    from .config import parse_run_config

    run = parse_run_config(meta["config"])
    clip, label = generate_clip(run.dataset, args.clip_index)
    net.refresh_snapshots()
    net.forward(clip[None])

    geometry = (run.dataset.frames, run.dataset.height, run.dataset.width)
    rows, files = [], []
    for b, blk in enumerate(net.blocks):
        smap = compute_block_saliency(blk, requested, block_id=b)
        paths = export_frames(smap, geometry, args.out)
        rows.append([b, smap.class_index, len(paths)])
        files.extend(str(p) for p in paths)
    _print_table(["block", "class", "frames"], rows,
                 title=f"saliency export (clip {args.clip_index}, label {label})")
    _print_json({
        "clip_index": args.clip_index,
        "label": int(label),
        "out_dir": str(args.out),
        "files": files,
    })
    return 0


def _cmd_flops(args) -> int:
    run = load_run_config(args.config)
    report = count_flops(run.spec, batch=args.batch)
    rows = [[c.name, c.kind, c.macs, 2 * c.macs] for c in report.layers]
    rows.append(["total (with blocks)", "", report.total_macs_with, report.total_flops_with])
    rows.append(["total (without)", "", report.total_macs_without, report.total_flops_without])
    _print_table(["layer", "kind", "MACs", "FLOPs"], rows,
                 title=f"analytic cost (batch {args.batch})")
    _print_json(report.to_dict())
    return 0


def _cmd_bench(args) -> int:
    run = load_run_config(args.config)
    report = bench_pair(run, samples=args.samples)
    rows = [
        [v["variant"], f"{v['median_ms']:.3f}", f"{v['iqr_ms']:.3f}", v["samples"]]
        for v in (report["baseline"], report["classreg"])
    ]
    rows.append(["added", f"{report['added_latency_ms']:+.3f}", "", ""])
    _print_table(["variant", "median_ms", "iqr_ms", "samples"], rows,
                 title="forward latency (single clip)")
    _print_json(report)
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="classreg",
        description="Spatio-temporal CNN with class-weight-driven activation excitation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train one variant from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=None, help="override train.seed")
    p.add_argument("--no-classreg", action="store_true",
                   help="strip all excitation blocks (baseline run)")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("compare", help="paired baseline-vs-classreg runs over seeds")
    p.add_argument("--config", required=True)
    p.add_argument("--seeds", type=int, required=True, help="number of paired seeds")
    p.set_defaults(func=_cmd_compare)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a config's val split")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--config", required=True)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("saliency", help="export per-block class saliency frames")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--clip-index", type=int, required=True)
    p.add_argument("--class", dest="class_spec", default="auto",
                   help="class index, or 'auto' for each block's selected class")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_saliency)

    p = sub.add_parser("flops", help="analytic multiply-accumulate counts")
    p.add_argument("--config", required=True)
    p.add_argument("--batch", type=int, default=1)
    p.set_defaults(func=_cmd_flops)

    p = sub.add_parser("bench", help="measured forward latency, both variants")
    p.add_argument("--config", required=True)
    p.add_argument("--samples", type=int, default=50)
    p.set_defaults(func=_cmd_bench)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        backend.get_backend()  # validate CLASSREG_BACKEND before any work
        backend.max_threads()  # likewise CLASSREG_THREADS
        return args.func(args)
    except ConfigError as exc:
        print(f"error: config: {exc}", file=sys.stderr)
        return 2
    except ClassRegError as exc:
        print(f"error: runtime: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: io: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
