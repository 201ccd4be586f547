"""Command-line surface: train / eval / check-transforms / bench / params.

Exit codes: 0 success, 1 usage problems (bad flags, missing files, bad
config), 2 data or checkpoint format errors, 3 numerical failures, 4
internal invariant violations.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import autograd as ag
from .checks import DEFAULT_SIZES_1D, bench_transform, run_transform_checks
from .configfile import load_config
from .data import (
    MetricsWriter,
    channel_stats,
    fine_labels,
    load_cifar100,
    load_checkpoint,
    normalize,
    save_checkpoint,
    stratified_subset,
    to_images,
    upscale_nearest,
    write_manifest,
    write_synthetic_cifar100,
)
from .errors import (
    ConfigError,
    DataFormatError,
    McmlpError,
    NumericsError,
)
from .model import count_macs, count_params, init_model
from .training import AdamWState, evaluate_top1, train_epoch

NATIVE_IMAGE_SIZE = 32


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="mcmlp", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model and write manifest/metrics/checkpoints")
    p.add_argument("--config", required=True, help="key=value config file")
    p.add_argument("--data", required=True, help="directory holding train.bin and test.bin")
    p.add_argument("--out", required=True, help="output directory for the run")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--epochs", type=int, default=None, help="override the config epoch count")
    p.add_argument("--subset", type=int, default=None,
                   help="train on a seed-stratified subset of this many images")

    p = sub.add_parser("eval", help="report test top-1 accuracy of a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)

    p = sub.add_parser("check-transforms", help="run all transform oracle and gradient checks")
    p.add_argument("--sizes", default="2..1024",
                   help="power-of-two range 'LO..HI' or comma list (default 2..1024)")
    p.add_argument("--trials", type=int, default=1000)

    p = sub.add_parser("bench", help="time the transform kernels")
    p.add_argument("--op", required=True, choices=("dct", "fwht"))
    p.add_argument("--sizes", required=True, help="comma-separated power-of-two sizes")
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--naive", action="store_true", help="time the dense O(N^2) path instead")

    p = sub.add_parser("params", help="print parameter and MAC counts for a config")
    p.add_argument("--config", required=True)

    p = sub.add_parser("synth-data", help="write a synthetic CIFAR-100-format dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--train", type=int, default=50_000)
    p.add_argument("--test", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=2024)
    return parser


def _parse_sizes(text: str) -> tuple[int, ...]:
    text = text.strip()
    if ".." in text:
        lo_text, _, hi_text = text.partition("..")
        lo, hi = int(lo_text), int(hi_text)
        if lo < 1 or hi < lo:
            raise ConfigError(f"bad size range {text!r}")
        sizes = []
        n = 1
        while n <= hi:
            if n >= lo:
                sizes.append(n)
            n *= 2
        if not sizes:
            raise ConfigError(f"no power-of-two sizes inside {text!r}")
        return tuple(sizes)
    return tuple(int(part) for part in text.split(",") if part.strip())


def _load_split(data_dir: str, name: str):
    path = os.path.join(data_dir, name)
    if not os.path.exists(path):
        raise _UsageError(f"missing data file {path}")
    records = load_cifar100(path)
    return to_images(records, dtype=np.float32), fine_labels(records)


def _prepare_images(images, mean, std, image_size):
    images = normalize(images, mean, std)
    return upscale_nearest(images, image_size)


def _cmd_train(args) -> int:
    ag.set_default_dtype(np.float32)
    model_cfg, train_cfg = load_config(args.config)
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.epochs is not None:
        overrides["epochs"] = args.epochs
    if overrides:
        d = train_cfg.to_dict()
        d.update(overrides)
        train_cfg = type(train_cfg).from_dict(d)

    train_images, train_labels = _load_split(args.data, "train.bin")
    test_images, test_labels = _load_split(args.data, "test.bin")
    if args.subset is not None:
        idx = stratified_subset(
            train_labels, args.subset, train_cfg.seed, model_cfg.num_classes
        )
        train_images, train_labels = train_images[idx], train_labels[idx]

    mean, std = channel_stats(train_images)
    train_images = _prepare_images(train_images, mean, std, model_cfg.image_size)
    test_images = _prepare_images(test_images, mean, std, model_cfg.image_size)

    os.makedirs(args.out, exist_ok=True)
    metrics_path = os.path.join(args.out, "metrics.csv")
    write_manifest(
        os.path.join(args.out, "manifest.json"),
        model_cfg,
        train_cfg,
        seed=train_cfg.seed,
        metrics_path=metrics_path,
        normalization={"mean": mean.tolist(), "std": std.tolist()},
        extra={"train_samples": int(len(train_images))},
    )
    metrics = MetricsWriter(metrics_path)

    model = init_model(model_cfg, seed=train_cfg.seed)
    state = AdamWState.initialize(model.named_parameters())
    best_top1 = -1.0
    for epoch in range(train_cfg.epochs):
        stats = train_epoch(model, (train_images, train_labels), state, train_cfg, epoch)
        top1 = evaluate_top1(model, (test_images, test_labels))
        metrics.append(epoch, stats["train_loss"], stats["lr"], top1, stats["seconds"])
        save_checkpoint(model, state, os.path.join(args.out, "last.ckpt"))
        if top1 > best_top1:
            best_top1 = top1
            save_checkpoint(model, state, os.path.join(args.out, "best.ckpt"))
        print(
            f"epoch {epoch:3d}  loss {stats['train_loss']:.4f}  "
            f"lr {stats['lr']:.2e}  val_top1 {100 * top1:.2f}%  "
            f"{stats['seconds']:.1f}s"
        )
    print(f"best val top-1: {100 * best_top1:.2f}%")
    return 0


def _cmd_eval(args) -> int:
    ag.set_default_dtype(np.float32)
    if not os.path.exists(args.checkpoint):
        raise _UsageError(f"missing checkpoint {args.checkpoint}")
    model, _ = load_checkpoint(args.checkpoint)
    train_images, _ = _load_split(args.data, "train.bin")
    mean, std = channel_stats(train_images)
    del train_images
    test_images, test_labels = _load_split(args.data, "test.bin")
    test_images = _prepare_images(test_images, mean, std, model.config.image_size)
    top1 = evaluate_top1(model, (test_images, test_labels))
    print(f"{100 * top1:.2f}")
    return 0


def _cmd_check_transforms(args) -> int:
    ag.set_default_dtype(np.float64)  # oracle comparisons are 64-bit
    sizes = _parse_sizes(args.sizes)
    sizes_2d = tuple(n for n in sizes if n <= 64)
    results = run_transform_checks(sizes=sizes, sizes_2d=sizes_2d, trials=args.trials)
    for result in results:
        print(result.line())
    ok = all(r.passed for r in results)
    print("all checks passed" if ok else "CHECKS FAILED")
    return 0 if ok else 4


def _cmd_bench(args) -> int:
    sizes = _parse_sizes(args.sizes)
    rows = bench_transform(args.op, sizes, trials=args.trials, naive=args.naive)
    label = f"{args.op} ({'naive' if args.naive else 'fast'})"
    print(f"{'size':>8s}  {'ns':>12s}  {'T(2N)/T(N)':>10s}")
    for row in rows:
        ratio = f"{row['ratio']:.2f}" if row["ratio"] else "-"
        print(f"{row['size']:8d}  {row['ns']:12.0f}  {ratio:>10s}   {label}")
    return 0


def _cmd_params(args) -> int:
    model_cfg, _ = load_config(args.config)
    print(f"params {count_params(model_cfg)}")
    print(f"macs   {count_macs(model_cfg)}")
    return 0


def _cmd_synth_data(args) -> int:
    train_path, test_path = write_synthetic_cifar100(
        args.out, train_records=args.train, test_records=args.test, seed=args.seed
    )
    print(f"wrote {train_path} and {test_path}")
    return 0


_HANDLERS = {
    "train": _cmd_train,
    "eval": _cmd_eval,
    "check-transforms": _cmd_check_transforms,
    "bench": _cmd_bench,
    "params": _cmd_params,
    "synth-data": _cmd_synth_data,
}


def cli_main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    try:
        return _HANDLERS[args.command](args)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (FileNotFoundError, IsADirectoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except DataFormatError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except NumericsError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except McmlpError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return 4


def main() -> None:
    sys.exit(cli_main(sys.argv[1:]))


if __name__ == "__main__":
    main()
