"""Command-line driver for gen-data, train, crossval and predict.

Data goes to stdout, diagnostics to stderr.  Exit status is 0 on success and
nonzero on any error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import __version__
from .backbone import build_backbone
from .data import ClassLabel, iter_images, load_manifest, read_image
from .errors import NoballError
from .evaluation import DEFAULT_BACKBONE_SEED, emit_report, run_crossval
from .synth import SynthConfig, generate_synthetic
from .training import TrainConfig, predict, save_model, load_model, train_head, write_trace


def _bounded(kind, name, lo=None, hi=None, lo_open=False, hi_open=False):
    def parse(text: str):
        try:
            value = kind(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"{name} must be a {kind.__name__}, got {text!r}")
        if lo is not None and (value < lo or (lo_open and value == lo)):
            raise argparse.ArgumentTypeError(f"{name} must be {'>' if lo_open else '>='} {lo}, got {value}")
        if hi is not None and (value > hi or (hi_open and value == hi)):
            raise argparse.ArgumentTypeError(f"{name} must be {'<' if hi_open else '<='} {hi}, got {value}")
        return value

    return parse


def _add_training_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--epochs", type=_bounded(int, "epochs", lo=0), default=30, help="training epochs")
    p.add_argument("--lr", type=_bounded(float, "lr", lo=0, lo_open=True), default=0.1, help="learning rate")
    p.add_argument("--batch", type=_bounded(int, "batch", lo=1), default=32, help="mini-batch size")
    p.add_argument("--seed", type=int, default=42, help="seed for shuffling, splits and folds")
    p.add_argument(
        "--validation-fraction",
        type=_bounded(float, "validation fraction", lo=0, hi=0.5, hi_open=True),
        default=0.1,
        help="stratified hold-out used for the validation columns of the trace",
    )
    p.add_argument(
        "--backbone-seed",
        type=int,
        default=DEFAULT_BACKBONE_SEED,
        help="seed of the frozen feature extractor",
    )


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = argparse.ArgumentParser(prog="noballnet", description=__doc__, formatter_class=fmt)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-data", help="write a synthetic two-class dataset", formatter_class=fmt)
    g.add_argument("--out", required=True, help="output directory")
    g.add_argument(
        "--count-per-class", type=_bounded(int, "count per class", lo=1), default=500, help="images per class"
    )
    g.add_argument("--seed", type=int, default=42, help="generator seed")
    g.add_argument("--noise", type=_bounded(float, "noise", lo=0), default=0.05, help="Gaussian noise sigma")
    g.add_argument(
        "--waist",
        type=_bounded(float, "waist", lo=0, hi=1, lo_open=True, hi_open=True),
        default=0.55,
        help="waist height as a fraction of image height from the bottom",
    )
    g.set_defaults(func=cmd_gen_data)

    t = sub.add_parser("train", help="retrain the output layer on a manifest", formatter_class=fmt)
    t.add_argument("--manifest", required=True, help="dataset manifest CSV")
    t.add_argument("--model-out", required=True, help="directory for backbone.cnw and head.cnw")
    t.add_argument("--trace", default=None, help="per-epoch trace CSV path")
    _add_training_flags(t)
    t.set_defaults(func=cmd_train)

    c = sub.add_parser("crossval", help="k-fold cross-validation report", formatter_class=fmt)
    c.add_argument("--manifest", required=True, help="dataset manifest CSV")
    c.add_argument("--k", type=_bounded(int, "k", lo=2), default=10, help="number of folds")
    c.add_argument("--report", required=True, help="report output path")
    c.add_argument("--format", choices=["csv", "json"], default="csv", help="report format")
    c.add_argument("--trace-dir", default=None, help="write one trace CSV per fold here")
    _add_training_flags(c)
    c.set_defaults(func=cmd_crossval)

    p = sub.add_parser("predict", help="classify one image", formatter_class=fmt)
    p.add_argument("--model", required=True, help="directory holding backbone.cnw and head.cnw")
    p.add_argument("--image", required=True, help="binary PPM/PGM image")
    p.set_defaults(func=cmd_predict)
    return parser


def _train_config(args) -> TrainConfig:
    return TrainConfig(
        learning_rate=args.lr,
        epochs=args.epochs,
        batch_size=args.batch,
        seed=args.seed,
        validation_fraction=args.validation_fraction,
    )


def cmd_gen_data(args) -> int:
    config = SynthConfig(seed=args.seed, noise_sigma=args.noise, waist_fraction=args.waist)
    dataset = generate_synthetic(config, args.count_per_class, args.out)
    for label in ClassLabel:
        count = sum(1 for r in dataset.records if r.label is label)
        print(f"{label.token}={count}")
    print(f"manifest={Path(args.out) / 'manifest.csv'}")
    return 0


def cmd_train(args) -> int:
    manifest = load_manifest(args.manifest)
    backbone = build_backbone(args.backbone_seed)
    head, trace = train_head(backbone, list(iter_images(manifest)), _train_config(args))
    save_model(args.model_out, backbone, head)
    if args.trace:
        write_trace(trace, args.trace)
    if trace.records:
        last = trace.records[-1]
        print(f"train_accuracy={last.train_accuracy:.6f} train_cross_entropy={last.train_cross_entropy:.6f}")
        if last.validation_accuracy is not None:
            print(
                f"validation_accuracy={last.validation_accuracy:.6f} "
                f"validation_cross_entropy={last.validation_cross_entropy:.6f}"
            )
    else:
        print("epochs=0 (head left at zero initialisation)")
    return 0


def cmd_crossval(args) -> int:
    manifest = load_manifest(args.manifest)
    backbone = build_backbone(args.backbone_seed)
    result = run_crossval(manifest, args.k, _train_config(args), args.seed, backbone)
    emit_report(result.rows, result.macro, args.report, args.format)
    if args.trace_dir:
        out = Path(args.trace_dir)
        out.mkdir(parents=True, exist_ok=True)
        for i, trace in enumerate(result.traces, start=1):
            write_trace(trace, out / f"fold_{i:02d}.csv")
    print(f"macro_accuracy={result.macro.accuracy:.6f}")
    return 0


def cmd_predict(args) -> int:
    backbone, head = load_model(args.model)
    label, probs = predict(backbone, head, read_image(args.image))
    print(f"label={label.token} p_legal={probs[0]:.6f} p_noball={probs[1]:.6f}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (NoballError, OSError) as exc:
        print(f"noballnet {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
