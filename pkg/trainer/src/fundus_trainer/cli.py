"""Command-line front end for the training harness.

Consumes the evaluation toolkit's files (manifest CSV, split CSV and a
preprocessed PNG tree) and writes score CSVs it can evaluate directly.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .errors import TrainerError
from .model import BACKBONES, TINY_CNN
from .train import TrainConfig, train_and_export

log = logging.getLogger("fundus_trainer")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fundus-train",
        description="Fine-tune a grading classifier on preprocessed fundus "
                    "images and export score CSVs")
    parser.add_argument("--manifest", type=Path, required=True)
    parser.add_argument("--split", type=Path, required=True)
    parser.add_argument("--images", type=Path, required=True,
                        help="preprocessed tree containing <side>/<image_id>.png")
    parser.add_argument("--out", type=Path, required=True)
    parser.add_argument("--system", required=True,
                        choices=("pirc", "pimec", "rdr", "rdme", "qrdr"))
    parser.add_argument("--size", type=int, required=True,
                        help="input side; selects the <side>/ subtree")
    parser.add_argument("--backbone", choices=BACKBONES, default=TINY_CNN)
    parser.add_argument("--pretrained", action="store_true")
    parser.add_argument("--lr0", type=float, default=1e-4)
    parser.add_argument("--dropout", type=float, default=0.5)
    parser.add_argument("--batch", type=int, default=6)
    parser.add_argument("--accum", type=int, default=None,
                        help="micro-batches per optimizer step "
                             "(default 15 when --batch 1, else 1)")
    parser.add_argument("--instance-norm", action="store_true",
                        help="replace batch normalization with per-instance "
                             "normalization (large-input mode)")
    parser.add_argument("--hidden", type=int, default=64)
    parser.add_argument("--epochs", type=int, default=20)
    parser.add_argument("--patience", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    config = TrainConfig(
        system=args.system,
        input_side=args.size,
        backbone=args.backbone,
        pretrained=args.pretrained,
        lr0=args.lr0,
        dropout=args.dropout,
        batch_size=args.batch,
        accumulation_steps=args.accum,
        instance_norm=args.instance_norm,
        hidden_dim=args.hidden,
        max_epochs=args.epochs,
        patience=args.patience,
        seed=args.seed,
    )
    try:
        result = train_and_export(config, args.manifest, args.split,
                                  args.images, args.out)
    except TrainerError as exc:
        print(f"fundus-train: error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"fundus-train: i/o error: {exc}", file=sys.stderr)
        return 2
    log.info("trained %d epoch(s), best %d; scores in %s",
             result.epochs_run, result.best_epoch, args.out)
    return 0


def entrypoint() -> None:
    sys.exit(main())
