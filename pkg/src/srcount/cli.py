"""Command-line entry point.

Subcommands: generate, train, eval, detect, sweep. Exit codes: 0 success,
2 configuration or validation failure, 3 I/O failure, 4 numeric
divergence, 5 file corruption.
"""

import argparse
import json
import sys
from dataclasses import replace

import numpy as np

from . import evalkit
from .array_model import Frame, frame_rng, sample_frame
from .config import load_config
from .detectors import (
    build_detector,
    detect_sources,
    detect_sources_coherent,
    train_detector,
)
from .errors import (
    ChecksumError,
    ConfigError,
    DataError,
    DivergenceError,
    DomainError,
    ShapeError,
    SrcountError,
)
from .evalkit import (
    ClassicalDetector,
    TrainableSpec,
    build_dataset,
    detector_name,
    evaluate,
    grid_coherent,
    rows_to_tsv,
    sweep_sinr,
    sweep_snapshots,
)
from .formats import (
    atomic_write,
    load_checkpoint,
    read_dataset,
    save_checkpoint,
    write_feature_dataset,
    write_frame_dataset,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_DIVERGED = 4
EXIT_CORRUPT = 5


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="srcount",
        description="Source enumeration toolkit: synthetic data, learned "
                    "and classical detectors, experiment sweeps.")
    parser.add_argument("--deterministic", action="store_true",
                        help="single-threaded generation and fixed reduction order")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a dataset file")
    p.add_argument("--config", required=True)
    p.add_argument("--split", default="test", choices=["train", "val", "test"])
    p.add_argument("--out", required=True)
    p.add_argument("--kind", default="features", choices=["features", "frames"])
    p.add_argument("--count", type=int, default=-1,
                   help="override the configured frame count")

    p = sub.add_parser("train", help="train a detector, write a checkpoint")
    p.add_argument("--config", required=True)
    p.add_argument("--train-data", required=True)
    p.add_argument("--val-data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--history", default="")

    p = sub.add_parser("eval", help="evaluate a detector over a dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--checkpoint", default="")
    p.add_argument("--baseline", default="", choices=["", "mdl", "aic"])
    p.add_argument("--fbss", type=int, default=0,
                   help="smooth with this subarray size before the baseline")
    p.add_argument("--self-test", action="store_true",
                   help="score an oracle that echoes the true labels")
    p.add_argument("--out-prefix", required=True)

    p = sub.add_parser("detect", help="classify frames from a raw frame file")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--frames", required=True)
    p.add_argument("--fbss", type=int, default=0)

    p = sub.add_parser("sweep", help="run a configured experiment sweep")
    p.add_argument("--config", required=True)
    p.add_argument("--kind", required=True, choices=["sinr", "snapshots", "grid"])
    p.add_argument("--out-dir", required=True)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {"generate": cmd_generate, "train": cmd_train, "eval": cmd_eval,
                "detect": cmd_detect, "sweep": cmd_sweep}
    try:
        return handlers[args.command](args)
    except (ConfigError, DataError, DomainError, ShapeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except ChecksumError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CORRUPT
    except SrcountError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


def _threads(args) -> int:
    return 1 if args.deterministic else 0


def cmd_generate(args) -> int:
    config = load_config(args.config)
    gen = config.generation_for(args.split)
    if args.count >= 0:
        gen = replace(gen, count=args.count)
    if args.kind == "features":
        dataset = build_dataset(config.geometry, gen, threads=_threads(args))
        write_feature_dataset(args.out, dataset)
        print(f"wrote {len(dataset)} feature records to {args.out}")
        return EXIT_OK
    frames = np.empty((gen.count, config.geometry.num_elements, gen.snapshots),
                      dtype=np.complex64)
    labels = np.empty((gen.count, 2), dtype=np.uint16)
    for i in range(gen.count):
        rng = frame_rng(gen.seed, gen.stream, i)
        scenario, _ = evalkit.draw_scenario(config.geometry, gen, rng)
        frame = sample_frame(config.geometry, scenario)
        frames[i] = frame.data
        labels[i] = (frame.label_total, frame.label_noncoherent)
    write_frame_dataset(args.out, frames, labels, config.geometry.num_elements,
                        gen.snapshots)
    print(f"wrote {gen.count} raw frames to {args.out}")
    return EXIT_OK


def cmd_train(args) -> int:
    config = load_config(args.config)
    train_set = read_dataset(args.train_data).to_labeled("train")
    val_set = read_dataset(args.val_data).to_labeled("val")
    width = config.feature_width
    for name, ds in (("train", train_set), ("val", val_set)):
        if ds.features.shape[1] != width:
            raise DataError(f"{name} data width {ds.features.shape[1]} does not "
                            f"match the configured pipeline width {width}")
    rng = np.random.default_rng([config.seed, 0xb111d])
    model = build_detector(config.architecture, width, config.num_classes, rng)
    model, history = train_detector(model, train_set, val_set, config.train)
    save_checkpoint(args.out, model)
    if args.history:
        lines = ["epoch\ttrain_loss\tval_accuracy"]
        lines += [f"{h.epoch}\t{h.train_loss:.6f}\t{h.val_accuracy:.6f}"
                  for h in history]
        atomic_write(args.history, ("\n".join(lines) + "\n").encode())
    final = history[-1].val_accuracy if history else float("nan")
    print(f"trained {config.architecture} for {config.train.epochs} epochs, "
          f"final val accuracy {final:.4f}; checkpoint at {args.out}")
    return EXIT_OK


def cmd_eval(args) -> int:
    dataset = read_dataset(args.data).to_labeled("test")
    chosen = [bool(args.checkpoint), bool(args.baseline), args.self_test]
    if sum(chosen) != 1:
        raise ConfigError("choose exactly one of --checkpoint, --baseline, --self-test")
    if args.checkpoint:
        detector = load_checkpoint(args.checkpoint)
    elif args.baseline:
        detector = ClassicalDetector(args.baseline, args.fbss)
    else:
        detector = _oracle
    report = evaluate(detector, dataset)
    atomic_write(args.out_prefix + ".confusion.tsv", report.confusion_table().encode())
    atomic_write(args.out_prefix + ".metrics.tsv", report.metrics_table().encode())
    summary = json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n"
    atomic_write(args.out_prefix + ".summary.json", summary.encode())
    print(f"accuracy {report.accuracy:.4f} over {len(dataset)} records; "
          f"reports at {args.out_prefix}.*")
    return EXIT_OK


def _oracle(dataset):
    return dataset.labels.copy()


def cmd_detect(args) -> int:
    model = load_checkpoint(args.checkpoint)
    data = read_dataset(args.frames)
    if data.kind != 0:
        raise DataError("detect expects a raw frame file (payload kind 0)")
    for i in range(data.count):
        frame = Frame(data.payload[i].astype(np.complex128),
                      int(data.labels[i, 0]), int(data.labels[i, -1]))
        if args.fbss:
            label = detect_sources_coherent(model, frame, args.fbss)
        else:
            label = detect_sources(model, frame)
        probs = _frame_probabilities(model, frame, args.fbss)
        print(f"{label} " + " ".join(f"{p:.6f}" for p in probs))
    return EXIT_OK


def _frame_probabilities(model, frame, fbss_subarray: int) -> np.ndarray:
    from .covariance import autocorrelation, extract_features, fbss

    cov = autocorrelation(frame)
    if fbss_subarray:
        cov = fbss(cov, fbss_subarray)
    values = extract_features(cov).values.astype(np.float32)
    logits = model.logits(values[None, :, None], train=False)[0]
    shifted = logits - logits.max()
    expd = np.exp(shifted)
    return expd / expd.sum()


def cmd_sweep(args) -> int:
    config = load_config(args.config)
    if config.sweep is None:
        raise ConfigError("sweep: missing sweep block in the configuration")
    if config.sweep.kind != args.kind:
        raise ConfigError(f"sweep.kind: configured {config.sweep.kind!r} but "
                          f"--kind {args.kind!r} requested")
    detectors = [_resolve_detector(d, config) for d in config.sweep.detectors]
    base = config.generation_for("test", count=0)

    if args.kind == "sinr":
        rows = sweep_sinr(detectors, config.sweep.points,
                          config.sweep.frames_per_point, config.geometry, base)
        columns = ["detector", "sinr_db", "accuracy"]
    elif args.kind == "snapshots":
        rows = sweep_snapshots(detectors, config.sweep.points,
                               config.sweep.frames_per_point, config.geometry, base)
        columns = ["detector", "snapshots", "accuracy"]
    else:
        rows = grid_coherent(detectors, config.sweep.noncoherent_range,
                             config.sweep.coherent_range,
                             config.sweep.frames_per_cell, config.geometry, base)
        columns = ["detector", "noncoherent", "coherent", "accuracy"]

    import os
    os.makedirs(args.out_dir, exist_ok=True)
    names = []
    for det in detectors:
        name = detector_name(det)
        names.append(name)
        subset = [r for r in rows if r["detector"] == name]
        atomic_write(os.path.join(args.out_dir, f"{args.kind}_{name}.tsv"),
                     rows_to_tsv(subset, columns).encode())
    atomic_write(os.path.join(args.out_dir, f"{args.kind}_all.tsv"),
                 rows_to_tsv(rows, columns).encode())
    print(f"swept {args.kind} over {len(names)} detectors; tables in {args.out_dir}")
    return EXIT_OK


def _resolve_detector(spec: dict, config):
    kind = spec["kind"]
    if kind == "checkpoint":
        model = load_checkpoint(spec["path"])
        model.display_name = spec.get("name", "")
        return model
    if kind in ("mdl", "aic"):
        return ClassicalDetector(kind, spec.get("fbss", 0),
                                 display_name=spec.get("name", ""))
    return TrainableSpec(
        architecture=spec["architecture"],
        num_classes=config.num_classes,
        train=config.train,
        train_count=spec["train_count"],
        val_count=spec["val_count"],
        name=spec.get("name", ""),
    )


if __name__ == "__main__":
    sys.exit(main())
