"""
Command-line entry point.

    edamrd process INPUT --out DIR [--fs HZ] [--order raw,phasic,...] [--config FILE]
    edamrd synth --n 40 --seed 7 --out data.jsonl
    edamrd train --data data.jsonl --out run/ [--config FILE] [--seed N]
    edamrd eval --checkpoint run/best --data data.jsonl [--split val]

Exit codes: 0 success, 1 usage or configuration error, 2 data or file
error, 3 training divergence. ``EDAMRD_LOG_LEVEL`` sets the log level.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import torch

from .config import PipelineConfig, config_from_dict, load_config, with_seed
from .dataio import atomic_write, read_signals, write_jsonl
from .encoder import PainModel, load_checkpoint
from .errors import (ConfigError, DataError, DivergenceError, EdamrdError, FileError, InvalidInputError,
                     InvalidParameterError)
from .features import feature_names
from .pipeline import build_bundle
from .rasterizer import compose_diagram, make_views, png_bytes
from .synthgen import generate_dataset
from .trainer import ImageDataset, evaluate, train

log = logging.getLogger("edamrd")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_DIVERGED = 0, 1, 2, 3


class UsageError(EdamrdError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _order_arg(text: str) -> tuple[str, ...]:
    return tuple(s for s in (p.strip() for p in text.split(",")) if s)


def _resolve(args) -> PipelineConfig:
    cfg = load_config(getattr(args, "config", None))
    if getattr(args, "order", None):
        data = cfg.to_dict()
        data["render"]["order"] = list(args.order)
        data["train"]["preset"] = cfg.preset
        cfg = config_from_dict(data)
    if getattr(args, "fusion", None):
        cfg = dataclasses.replace(cfg, fusion=args.fusion)
    if getattr(args, "seed", None) is not None:
        cfg = with_seed(cfg, args.seed)
    log.info("resolved config:\n%s", cfg.to_json())
    return cfg


def _bundle_json(bundle, cfg: PipelineConfig) -> bytes:
    doc = bundle.to_dict()
    doc["feature_names"] = feature_names(cfg.features)
    return (json.dumps(doc, sort_keys=True) + "\n").encode()


def _process_one(i, record, cfg: PipelineConfig, out_dir):
    try:
        bundle = build_bundle(record.signal, cfg.signal, cfg.tvsymp, cfg.features)
        diagram = compose_diagram(bundle, cfg.render.order, line_thickness_px=cfg.render.line_thickness_px)
    except (InvalidInputError, InvalidParameterError) as exc:
        raise DataError(f"window {i}: {exc}") from None
    stem = os.path.join(out_dir, f"window_{i:04d}")
    atomic_write(stem + ".json", _bundle_json(bundle, cfg))
    atomic_write(stem + ".png", png_bytes(diagram))
    atomic_write(stem + ".panels.json", (diagram.panel_map_json() + "\n").encode())
    return stem


def cmd_process(args) -> int:
    cfg = _resolve(args)
    records = read_signals(args.input, args.fs)
    os.makedirs(args.out, exist_ok=True)
    with ThreadPoolExecutor(max_workers=args.workers) as pool:
        futures = [pool.submit(_process_one, i, r, cfg, args.out) for i, r in enumerate(records)]
        stems = [f.result() for f in futures]
    log.info("wrote %d window(s) to %s", len(stems), args.out)
    return EXIT_OK


def cmd_synth(args) -> int:
    if args.n < 1:
        raise UsageError("--n must be >= 1")
    records = generate_dataset(args.n, args.seed)
    out_dir = os.path.dirname(os.path.abspath(args.out))
    os.makedirs(out_dir, exist_ok=True)
    write_jsonl(records, args.out)
    log.info("wrote %d windows to %s", len(records), args.out)
    return EXIT_OK


def build_dataset(records, cfg: PipelineConfig) -> ImageDataset:
    """Render every labelled record into the views the configured model expects."""
    if not records:
        raise DataError("no labelled windows")
    views, labels = [], []
    for i, r in enumerate(records):
        if r.label is None:
            raise DataError(f"window {i} has no label")
        if not 0 <= r.label < cfg.encoder.n_classes:
            raise DataError(f"window {i}: label {r.label} outside 0..{cfg.encoder.n_classes - 1}")
        try:
            bundle = build_bundle(r.signal, cfg.signal, cfg.tvsymp, cfg.features)
        except (InvalidInputError, InvalidParameterError) as exc:
            raise DataError(f"window {i}: {exc}") from None
        views.append(make_views(bundle, cfg.render.order, cfg.fusion, cfg.encoder.image_size,
                                cfg.render.line_thickness_px))
        labels.append(r.label)
    return ImageDataset(np.stack(views), np.asarray(labels))


def make_model(cfg: PipelineConfig) -> PainModel:
    torch.manual_seed(cfg.seed)
    return PainModel(cfg.encoder, cfg.fusion, cfg.n_views)


def run_training(cfg: PipelineConfig, records, out_dir=None):
    train_recs = [r for r in records if r.split != "val"]
    val_recs = [r for r in records if r.split == "val"]
    train_data = build_dataset(train_recs, cfg)
    val_data = build_dataset(val_recs, cfg) if val_recs else None
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        atomic_write(os.path.join(out_dir, "config.json"), (cfg.to_json() + "\n").encode())
    model = make_model(cfg)
    return train(model, train_data, val_data, cfg.train, cfg.augment, out_dir=out_dir,
                 extra={"config": cfg.to_dict()})


def cmd_train(args) -> int:
    cfg = _resolve(args)
    records = read_signals(args.data, None)
    result = run_training(cfg, records, args.out)
    log.info("best epoch %d, val macro accuracy %.4f", result.best_epoch, result.best_val_acc)
    return EXIT_OK


def cmd_eval(args) -> int:
    model, manifest = load_checkpoint(args.checkpoint)
    stored = manifest.get("extra", {}).get("config")
    cfg = config_from_dict(stored) if stored else PipelineConfig(fusion=model.fusion)
    records = read_signals(args.data, None)
    if args.split:
        records = [r for r in records if r.split == args.split]
    data = build_dataset(records, cfg)
    metrics = evaluate(model, data)
    out = {k: metrics[k] for k in ("macro_accuracy", "macro_precision", "macro_f1")}
    print(json.dumps(out, sort_keys=True))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="edamrd", description="EDA multi-representation diagrams and classifier.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("process", help="derive representations, features and diagrams per window")
    p.add_argument("input", help="CSV (one 'value' column) or JSONL windows")
    p.add_argument("--out", required=True)
    p.add_argument("--fs", type=float, default=None, help="sampling rate for CSV input (Hz)")
    p.add_argument("--order", type=_order_arg, default=None, help="comma-separated representations")
    p.add_argument("--config", default=None)
    p.add_argument("--workers", type=int, default=4)
    p.set_defaults(func=cmd_process)

    p = sub.add_parser("synth", help="write a synthetic labelled dataset")
    p.add_argument("--n", type=int, required=True, help="windows per class")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train a classifier on labelled JSONL windows")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--order", type=_order_arg, default=None)
    p.add_argument("--fusion", choices=("mrd", "add", "concat"), default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="macro metrics of a checkpoint on labelled windows")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--split", default=None, help="only evaluate windows with this split tag")
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv=None) -> int:
    level = getattr(logging, os.environ.get("EDAMRD_LOG_LEVEL", "WARNING").upper(), logging.WARNING)
    logging.basicConfig(level=level if isinstance(level, int) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, ConfigError, InvalidParameterError) as exc:
        print(f"edamrd: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, FileError, InvalidInputError) as exc:
        print(f"edamrd: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except DivergenceError as exc:
        print(f"edamrd: error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED


if __name__ == "__main__":
    sys.exit(main())
