#!/usr/bin/env python3
"""
Geoseg command line.

Subcommands:
    synth       write a synthetic raster corpus
    tile        cut rasters into train/val/test tiles plus a manifest
    train       train one model and write its log and checkpoint
    evaluate    compute the six metrics of one or more checkpoints on the test tiles
    visualize   write single-model or model-comparison result grids
    benchmark   measure training/testing FPS of one or more models

Exit codes: 0 success, 2 usage or validation error, 3 training divergence.
"""

import argparse
import json
import logging
import sys
from typing import List, Optional, Sequence

import numpy as np

import bench
import charts
import datakit
import trainer
import viz
from errors import DivergenceError, GeosegError
from format_report import render_metrics_table
from run_config import RunConfig, load_run_config, save_resolved
from zoo import FAMILIES, build_model, load_checkpoint

logger = logging.getLogger("geoseg")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DIVERGENCE = 3

DEFAULTS = {name: info.default for name, info in RunConfig.model_fields.items()}


def _help(text: str, key: str) -> str:
    default = DEFAULTS.get(key)
    if isinstance(default, (tuple, list)):
        default = ",".join(str(v) for v in default)
    return f"{text} (default: {default})"


def _floats(value: str) -> List[float]:
    return [float(v) for v in value.split(",") if v.strip()]


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="flat JSON config file (default: none)")
    parser.add_argument("--seed", type=int, help=_help("random seed", "seed"))
    parser.add_argument("--device", help="compute device (default: $GEOSEG_DEVICE or cpu)")
    parser.add_argument("--log-dir", dest="log_dir", help=_help("log directory", "log_dir"))
    parser.add_argument("--verbose", action="store_true", help="debug logging (default: off)")


def _add_architecture(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--model", help=_help(f"model family, one of {', '.join(FAMILIES)}", "model"))
    parser.add_argument("--base-channels", dest="base_channels", type=int, help=_help("encoder width at stage 1", "base_channels"))
    parser.add_argument("--leaky-slope", dest="leaky_slope", type=float, help=_help("BR-Net LeakyReLU slope", "leaky_slope"))
    parser.add_argument("--mc-head-weights", dest="mc_head_weights", type=_floats, help=_help("MC-FCN head loss weights, comma separated", "mc_head_weights"))
    parser.add_argument("--br-loss-weights", dest="br_loss_weights", type=_floats, help=_help("BR-Net mask,boundary loss weights", "br_loss_weights"))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="geoseg", description="Building segmentation toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write a synthetic raster corpus")
    _add_common(p)
    p.add_argument("--out", required=True, help="output directory (gets img/ and msk/)")
    p.add_argument("--count", type=int, default=8, help="number of rasters (default: 8)")
    p.add_argument("--size", type=int, default=448, help="raster edge in pixels, multiple of 32 (default: 448)")

    p = sub.add_parser("tile", help="cut rasters into tiles")
    _add_common(p)
    p.add_argument("--input", required=True, help="directory with img/ and msk/ raster pairs")
    p.add_argument("--out", dest="data_dir", help=_help("dataset output directory", "data_dir"))
    p.add_argument("--size", dest="tile_size", type=int, help=_help("tile size", "tile_size"))
    p.add_argument("--stride", type=int, help="window stride (default: tile size)")
    p.add_argument("--min-coverage", dest="min_coverage", type=float, help=_help("minimum building coverage of training tiles", "min_coverage"))
    p.add_argument("--val-fraction", dest="val_fraction", type=float, help=_help("validation share of the training region", "val_fraction"))
    p.add_argument("--test-ids", dest="test_ids", help="comma separated raster ids of the testing region (default: second half of ids)")

    p = sub.add_parser("train", help="train one model")
    _add_common(p)
    _add_architecture(p)
    p.add_argument("--data", dest="data_dir", help=_help("dataset directory", "data_dir"))
    p.add_argument("--checkpoint-dir", dest="checkpoint_dir", help=_help("checkpoint directory", "checkpoint_dir"))
    p.add_argument("--learning-rate", dest="learning_rate", type=float, help=_help("Adam learning rate", "learning_rate"))
    p.add_argument("--betas", type=_floats, help=_help("Adam betas", "betas"))
    p.add_argument("--batch-size", dest="batch_size", type=int, help=_help("batch size", "batch_size"))
    p.add_argument("--iterations", type=int, help=_help("optimizer steps", "iterations"))
    p.add_argument("--eval-every", dest="eval_every", type=int, help=_help("iterations between validations", "eval_every"))

    p = sub.add_parser("evaluate", help="evaluate one or more checkpoints")
    _add_common(p)
    p.add_argument("--checkpoint", dest="checkpoints", nargs="+", required=True, help="one or more checkpoint files, one per model family")
    p.add_argument("--data", dest="data_dir", help=_help("dataset directory", "data_dir"))
    p.add_argument("--split", default="test", choices=datakit.SPLIT_NAMES, help="tiles to evaluate on (default: test)")
    p.add_argument("--result-dir", dest="result_dir", help=_help("result directory", "result_dir"))
    p.add_argument("--threshold", type=float, help=_help("binarization threshold", "threshold"))

    p = sub.add_parser("visualize", help="write result grids")
    _add_common(p)
    p.add_argument("--checkpoint", dest="checkpoints", nargs="+", required=True, help="one or more checkpoint files")
    p.add_argument("--data", dest="data_dir", help=_help("dataset directory", "data_dir"))
    p.add_argument("--split", default="test", choices=datakit.SPLIT_NAMES, help="tiles to sample from (default: test)")
    p.add_argument("--samples", type=int, help=_help("number of samples", "samples"))
    p.add_argument("--mode", choices=["single", "compare"], default="single", help="grid type (default: single)")
    p.add_argument("--result-dir", dest="result_dir", help=_help("result directory", "result_dir"))
    p.add_argument("--threshold", type=float, help=_help("binarization threshold", "threshold"))

    p = sub.add_parser("benchmark", help="measure training/testing FPS")
    _add_common(p)
    p.add_argument("--models", default="all", help="'all' or comma separated families (default: all)")
    p.add_argument("--base-channels", dest="base_channels", type=int, help=_help("encoder width at stage 1", "base_channels"))
    p.add_argument("--batch-size", dest="bench_batch_size", type=int, help=_help("batch size", "bench_batch_size"))
    p.add_argument("--warmup", dest="warmup_iters", type=int, help=_help("untimed iterations", "warmup_iters"))
    p.add_argument("--timed", dest="timed_iters", type=int, help=_help("timed iterations", "timed_iters"))
    p.add_argument("--image-size", dest="bench_image_size", type=int, help=_help("synthetic image size", "bench_image_size"))
    p.add_argument("--result-dir", dest="result_dir", help=_help("result directory", "result_dir"))
    return parser


# Argument names that are not RunConfig fields
NON_CONFIG_ARGS = {
    "command", "config", "verbose", "out", "count", "size", "input", "test_ids",
    "checkpoint", "checkpoints", "split", "mode", "models",
}


def resolve_config(args: argparse.Namespace) -> RunConfig:
    overrides = {k: v for k, v in vars(args).items() if k not in NON_CONFIG_ARGS}
    return load_run_config(args.config, overrides)


def cmd_synth(args: argparse.Namespace, config: RunConfig) -> int:
    pairs = datakit.synth_corpus(args.count, args.size, config.seed)
    datakit.save_pairs(pairs, args.out)
    print(f"Wrote {len(pairs)} synthetic rasters to {args.out}")
    return EXIT_OK


def cmd_tile(args: argparse.Namespace, config: RunConfig) -> int:
    pairs = datakit.load_pairs(args.input)
    test_ids = [i for i in args.test_ids.split(",") if i] if args.test_ids else None
    dataset = datakit.prepare(
        pairs,
        size=config.tile_size,
        stride=config.stride,
        min_coverage=config.min_coverage,
        val_fraction=config.val_fraction,
        seed=config.seed,
        test_ids=test_ids,
    )
    datakit.write_split(dataset, config.data_dir)
    save_resolved(config, config.log_dir / "tile")
    for name, count in dataset.counts().items():
        print(f"{name}: {count}")
    return EXIT_OK


def cmd_train(args: argparse.Namespace, config: RunConfig) -> int:
    arch = config.architecture()
    tcfg = config.training()
    model = build_model(arch, config.seed)
    dataset = datakit.read_split(config.data_dir, seed=config.seed)
    save_resolved(config, tcfg.log_dir)

    model, log = trainer.train(model, dataset, tcfg)
    trainer.write_log(log, tcfg.log_dir)
    trainer.plot_learning_curve(log, tcfg.log_dir / trainer.CURVE_NAME, title=arch.family)
    print(f"Trained {arch.family} for {len(log)} iterations; final loss {log.rows[-1].train_loss:.4f}")
    print(f"Checkpoint: {tcfg.checkpoint_dir / trainer.CHECKPOINT_NAME}")
    return EXIT_OK


def _load_samples(config: RunConfig, split: str) -> List[datakit.TileSample]:
    samples = datakit.read_split(config.data_dir, seed=config.seed).parts()[split]
    if not samples:
        raise GeosegError("empty-dataset", f"the {split} split under {config.data_dir} is empty")
    return samples


def cmd_evaluate(args: argparse.Namespace, config: RunConfig) -> int:
    device = trainer.resolve_device(config.device)
    models = [load_checkpoint(path, map_location=device) for path in args.checkpoints]
    families = [model.config.family for model in models]
    duplicates = sorted({f for f in families if families.count(f) > 1})
    if duplicates:
        raise GeosegError("duplicate-model", f"more than one checkpoint for {', '.join(duplicates)}")
    samples = _load_samples(config, args.split)

    reports = {}
    config.result_dir.mkdir(parents=True, exist_ok=True)
    for family, model in zip(families, models):
        reports[family] = trainer.validate(model, samples, config.threshold)
        path = config.result_dir / f"{family}_metrics.json"
        with open(path, "w") as f:
            json.dump(reports[family].to_dict(), f, indent=2)
        logger.info(f"Wrote metrics report to {path}")

    table = render_metrics_table(reports)
    (config.result_dir / "metrics.txt").write_text(table)
    charts.plot_metrics_comparison(reports, config.result_dir / charts.METRICS_CHART_NAME)
    save_resolved(config, config.log_dir / "evaluate")
    print(table, end="")
    return EXIT_OK


def cmd_visualize(args: argparse.Namespace, config: RunConfig) -> int:
    if args.mode == "compare" and len(args.checkpoints) < 2:
        raise GeosegError("need-multiple-models", "--mode compare needs at least 2 checkpoints")
    device = trainer.resolve_device(config.device)
    models = [load_checkpoint(path, map_location=device) for path in args.checkpoints]
    pool = _load_samples(config, args.split)

    rng = np.random.default_rng(config.seed)
    count = min(config.samples, len(pool))
    picked = [pool[i] for i in sorted(rng.choice(len(pool), size=count, replace=False))]
    sample_ids = "+".join(s.name for s in picked)

    if args.mode == "single":
        for model in models:
            canvas = viz.compose_single(picked, model, config.threshold, config.canny_low, config.canny_high, config.canny_sigma)
            viz.save_canvas(canvas, config.result_dir / f"{model.config.family}_{sample_ids}.png")
    else:
        canvas = viz.compose_comparison(picked, models, config.threshold)
        viz.save_canvas(canvas, config.result_dir / f"compare_{sample_ids}.png")
    save_resolved(config, config.log_dir / "visualize")
    return EXIT_OK


def cmd_benchmark(args: argparse.Namespace, config: RunConfig) -> int:
    if args.models == "all":
        families = list(FAMILIES)
    else:
        families = [m for m in args.models.split(",") if m]
    result = bench.run_suite(families, config.bench())

    bench.write_records(result.records, config.log_dir / "benchmark.csv")
    config.result_dir.mkdir(parents=True, exist_ok=True)
    (config.result_dir / "benchmark.txt").write_text(result.table)
    if result.records:
        charts.plot_benchmark(result.records, config.result_dir / charts.BENCHMARK_CHART_NAME)
    save_resolved(config, config.log_dir / "benchmark")
    print(result.table, end="")
    return EXIT_OK


COMMANDS = {
    "synth": cmd_synth,
    "tile": cmd_tile,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "visualize": cmd_visualize,
    "benchmark": cmd_benchmark,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
    )

    try:
        config = resolve_config(args)
        return COMMANDS[args.command](args, config)
    except DivergenceError as e:
        logger.error(f"Training diverged: {e}")
        return EXIT_DIVERGENCE
    except GeosegError as e:
        logger.error(str(e))
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
