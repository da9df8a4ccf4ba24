"""Command-line experiment harness.

Subcommands: ``train`` (one run: metrics.csv, masks.bin, final.fthr, and the
resolved config as config.txt), ``eval`` (top-1 of a checkpoint on the
validation split), ``sweep`` (cross-product of axis values by seeds, child
failures recorded per cell), ``analyze-masks`` (stability curve CSV from a
masks.bin), and ``flops`` (per-layer dense/kept FLOPs from a checkpoint).

Exit codes: 0 success, 1 run failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import itertools
import math
import struct
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .analysis import MaskSnapshot, curve_to_csv, flops_count, stability_curve
from .checkpoint import (
    MASK_SUFFIX,
    load_checkpoint,
    model_records,
    restore_model,
    save_checkpoint,
    snapshot_records,
)
from .config import (
    RunSpec,
    build_descriptor,
    build_model_for,
    build_operator,
    build_runspec,
    config_to_text,
    resolve_config,
)
from .datasets import IDX_IMAGES_MAGIC, DatasetDescriptor, load_dataset
from .errors import ConfigError, FormatError, TrainingDivergedError
from .tensor import Tensor
from .thresholding import apply_threshold
from .trainer import evaluate_top1, train

__all__ = ["main", "run_spec"]


def run_spec(spec: RunSpec) -> dict:
    """Execute one training run into its output directory."""
    out = spec.out_dir
    out.mkdir(parents=True, exist_ok=True)
    dataset = load_dataset(spec.descriptor, expected_classes=spec.values["model.classes"])
    model = build_model_for(spec.values, dataset.input_shape, spec.train.seed)
    (out / "config.txt").write_text(config_to_text(spec.values), encoding="utf-8")

    result = train(spec.train, model, dataset)
    result.metrics.write_csv(out / "metrics.csv")
    save_checkpoint(out / "masks.bin", snapshot_records(result.snapshots))
    save_checkpoint(out / "final.fthr", model_records(model, result.states))

    last = result.metrics.records[-1]
    return {
        "label": spec.label,
        "val_top1": last.val_top1,
        "achieved_sparsity": last.achieved_sparsity,
        "theta": result.theta,
    }


def _resolved(args) -> dict:
    file_text = Path(args.config).read_text(encoding="utf-8") if args.config else None
    overrides = list(args.set or [])
    if getattr(args, "seed", None) is not None:
        overrides.append(f"run.seed={args.seed}")
    return resolve_config(file_text, overrides)


def _input_shape(desc: DatasetDescriptor) -> tuple:
    if desc.kind == "blobs":
        return (desc.dims,)
    with open(desc.images_path, "rb") as fh:
        header = fh.read(16)
    if len(header) < 16:
        raise FormatError(f"{desc.images_path}: truncated header, file ends at {len(header)}")
    magic, _, rows, cols = struct.unpack(">IIII", header)
    if magic != IDX_IMAGES_MAGIC:
        raise FormatError(
            f"{desc.images_path}: bad magic 0x{magic:08x} at offset 0, "
            f"expected 0x{IDX_IMAGES_MAGIC:08x}"
        )
    return (1, rows, cols)


def _emit(text: str, out_path) -> None:
    if out_path:
        Path(out_path).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def cmd_train(args) -> int:
    values = _resolved(args)
    spec = build_runspec(values, args.out)
    summary = run_spec(spec)
    print(
        f"{summary['label']}: val_top1={summary['val_top1']!r} "
        f"sparsity={summary['achieved_sparsity']!r} theta={summary['theta']!r} "
        f"-> {spec.out_dir}"
    )
    return 0


def cmd_eval(args) -> int:
    values = _resolved(args)
    records = load_checkpoint(args.checkpoint)
    dataset = load_dataset(build_descriptor(values), expected_classes=values["model.classes"])
    model = build_model_for(values, dataset.input_shape, values["run.seed"])
    restore_model(model, records)
    op = build_operator(values)
    overrides = {}
    for layer in model.layers:
        key = f"{layer.name}/threshold"
        if key in records:
            pruned, _ = apply_threshold(layer.weight.data, float(records[key][0]), op)
            overrides[id(layer)] = Tensor(pruned)
    acc = evaluate_top1(model, dataset.val_x, dataset.val_y,
                        values["train.batch_size"], overrides or None)
    _emit(f"metric,value\nval_top1,{acc!r}\n", args.out)
    return 0


def _cell_dirname(axis_pairs: list[tuple[str, str]]) -> str:
    return "__".join(f"{key.replace('.', '-')}_{value}" for key, value in axis_pairs)


def _run_cell(payload) -> tuple:
    """One sweep cell run; returns (status, val_top1). Picklable for pools."""
    file_text, overrides, out_dir = payload
    try:
        values = resolve_config(file_text, overrides)
        spec = build_runspec(values, out_dir)
        summary = run_spec(spec)
        return ("ok", summary["val_top1"])
    except Exception as exc:  # noqa: BLE001 - cell failures must not kill the sweep
        return (f"{type(exc).__name__}: {exc}", math.nan)


def cmd_sweep(args) -> int:
    file_text = Path(args.config).read_text(encoding="utf-8") if args.config else None
    base_overrides = list(args.set or [])
    axes: list[tuple[str, list[str]]] = []
    for item in args.axis or []:
        if "=" not in item:
            raise ConfigError(f"axis must look like key=v1,v2,..., got {item!r}")
        key, _, raw = item.partition("=")
        values = [v.strip() for v in raw.split(",") if v.strip()]
        if not values:
            raise ConfigError(f"axis {key!r} lists no values")
        axes.append((key.strip(), values))
    if not axes:
        raise ConfigError("sweep needs at least one --axis")
    seeds = [int(s) for s in args.seeds.split(",") if s.strip()]
    if not seeds:
        raise ConfigError("sweep needs at least one seed")

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cells = list(itertools.product(*(values for _, values in axes)))
    jobs = []
    for combo in cells:
        axis_pairs = list(zip((key for key, _ in axes), combo))
        cell_dir = out / _cell_dirname(axis_pairs)
        for seed in seeds:
            overrides = base_overrides + [f"{k}={v}" for k, v in axis_pairs] \
                + [f"run.seed={seed}"]
            jobs.append((file_text, overrides, str(cell_dir / f"seed{seed}")))

    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_run_cell, jobs))
    else:
        results = [_run_cell(job) for job in jobs]

    header = [key for key, _ in axes] + ["seeds", "mean_val_top1", "std_val_top1", "failures"]
    lines = [",".join(header)]
    failed_cells = 0
    for i, combo in enumerate(cells):
        cell_results = results[i * len(seeds) : (i + 1) * len(seeds)]
        accs = [acc for status, acc in cell_results if status == "ok"]
        failures = len(seeds) - len(accs)
        failed_cells += failures
        for status, _ in cell_results:
            if status != "ok":
                print(f"cell {combo} failed: {status}", file=sys.stderr)
        mean = float(np.mean(accs)) if accs else math.nan
        std = float(np.std(accs)) if accs else math.nan
        lines.append(",".join(list(combo) + [str(len(accs)), repr(mean), repr(std), str(failures)]))
    (out / "sweep.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"sweep: {len(cells)} cells x {len(seeds)} seeds -> {out / 'sweep.csv'}")
    return 0


def _snapshots_from_records(records: dict) -> list[MaskSnapshot]:
    by_epoch: dict[int, dict] = {}
    for name, value in records.items():
        prefix, _, rest = name.partition("/")
        if not prefix.startswith("epoch") or not rest.endswith(MASK_SUFFIX):
            raise FormatError(f"unexpected record {name!r} in mask container")
        epoch = int(prefix[len("epoch"):])
        layer = rest[: -len(MASK_SUFFIX)]
        by_epoch.setdefault(epoch, {})[layer] = value.astype(bool)
    return [MaskSnapshot(epoch, masks) for epoch, masks in sorted(by_epoch.items())]


def cmd_analyze_masks(args) -> int:
    records = load_checkpoint(args.masks)
    snapshots = _snapshots_from_records(records)
    curve = stability_curve(snapshots)
    _emit(curve_to_csv(curve), args.out)
    return 0


def cmd_flops(args) -> int:
    values = _resolved(args)
    records = load_checkpoint(args.checkpoint)
    shape = _input_shape(build_descriptor(values))
    model = build_model_for(values, shape, values["run.seed"])
    masks = {}
    for layer in model.layers:
        key = f"{layer.name}{MASK_SUFFIX}"
        if key in records:
            masks[layer.name] = records[key].astype(bool)
        else:
            masks[layer.name] = np.ones(layer.weight.shape, dtype=bool)
    report = flops_count(model, masks)
    _emit(report.to_csv(), args.out)
    return 0


def _add_common(parser, need_out: bool) -> None:
    parser.add_argument("--config", help="key=value config file")
    parser.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override one config key (repeatable)")
    parser.add_argument("--seed", type=int, help="shorthand for run.seed")
    parser.add_argument("--out", required=need_out,
                        help="output directory" if need_out else "output file (default stdout)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="featherprune",
                                     description="sparse training experiment harness")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="run one training job")
    _add_common(p, need_out=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on the validation split")
    p.add_argument("--checkpoint", required=True)
    _add_common(p, need_out=False)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="grid of runs over config axes and seeds")
    p.add_argument("--axis", action="append", metavar="KEY=V1,V2,...",
                   help="one sweep axis (repeatable)")
    p.add_argument("--seeds", default="0", help="comma-separated seed list")
    p.add_argument("--jobs", type=int, default=1, help="concurrent cell runs")
    _add_common(p, need_out=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("analyze-masks", help="mask stability curve from a masks.bin")
    p.add_argument("--masks", required=True)
    p.add_argument("--out", help="output file (default stdout)")
    p.set_defaults(func=cmd_analyze_masks)

    p = sub.add_parser("flops", help="per-layer FLOPs report from a checkpoint")
    p.add_argument("--checkpoint", required=True)
    _add_common(p, need_out=False)
    p.set_defaults(func=cmd_flops)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (FormatError, TrainingDivergedError, OSError, ValueError) as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
