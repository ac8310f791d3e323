"""Command-line entry point.

Subcommands wire the library into the screening workflow:

  synth       generate populations, score files and disk images
  split       patient-exclusive stratified train/tune/validation division
  preprocess  crop + resize manifest images into per-size PNG trees
  eval        binary or multiclass evaluation reports and ROC figures
  report      re-render a stored JSON report

Machine output goes to files only; diagnostics go to stderr. Exit codes:
0 success, 1 validation error, 2 I/O error, 64 usage error. The
FUNDUS_EVAL_LOG environment variable (error|warn|info|debug) sets verbosity.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import FundusEvalError, RangeError
from .evaluation import evaluate_binary, evaluate_multiclass
from .grading import GradingSystem, parse_manifest, records_for_system, serialize_manifest
from .metrics import CI_CLOPPER_PEARSON, CI_CLUSTER_BOOTSTRAP, parse_scores, serialize_scores
from .preprocessing import PRESET_SIZES, run_preprocess
from .rendering import REPORT_FORMATS, report_from_json_dict, write_report_files
from .splitting import SplitSpec, parse_split, serialize_split, split
from .synth import (
    PRESET_MARGINALS,
    PopulationSpec,
    gen_fundus_image,
    gen_population,
    preset_population,
    scores_for_manifest,
)

log = logging.getLogger("fundus_eval")

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_IO = 2
EXIT_USAGE = 64

_LOG_LEVELS = {"error": logging.ERROR, "warn": logging.WARNING,
               "info": logging.INFO, "debug": logging.DEBUG}


class _Parser(argparse.ArgumentParser):
    """argparse with usage failures mapped to exit code 64."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _configure_logging():
    level = os.environ.get("FUNDUS_EVAL_LOG", "warn").lower()
    logging.basicConfig(stream=sys.stderr,
                        level=_LOG_LEVELS.get(level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def _read_text(path: Path) -> str:
    return Path(path).read_text(encoding="utf-8")


def _load_manifest(path: Path, drop_flagged: bool):
    records, diagnostics = parse_manifest(_read_text(path), drop_flagged=drop_flagged)
    for diag in diagnostics:
        log.warning("%s: %s", path, diag)
    if diagnostics:
        log.warning("%s: %d row(s) rejected or dropped", path, len(diagnostics))
    return records


def _comma_ints(text: str) -> list[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise RangeError(f"expected comma-separated integers, got {text!r}") from None


def _comma_floats(text: str) -> list[float]:
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise RangeError(f"expected comma-separated numbers, got {text!r}") from None


# ---------------------------------------------------------------------------
# Subcommand implementations
# ---------------------------------------------------------------------------


def _cmd_split(args) -> int:
    records = _load_manifest(args.manifest, args.drop_flagged)
    system = GradingSystem.from_name(args.system)
    labeled = records_for_system(records, system)
    fractions = tuple(_comma_floats(args.fractions))
    spec = SplitSpec(fractions=fractions, seed=args.seed, tolerance=args.tolerance)
    assignment = split(labeled, spec)

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(serialize_split(assignment), encoding="utf-8")
    prefix = Path(args.table_prefix) if args.table_prefix else out.with_name(out.stem + "_table")
    prefix.parent.mkdir(parents=True, exist_ok=True)
    prefix.with_suffix(".txt").write_text(assignment.distribution.to_text(), encoding="utf-8")
    prefix.with_suffix(".csv").write_text(assignment.distribution.to_csv(), encoding="utf-8")
    log.info("wrote %s and distribution tables %s.{txt,csv}", out, prefix)
    return EXIT_OK


def _cmd_preprocess(args) -> int:
    records = _load_manifest(args.manifest, args.drop_flagged)
    sizes = _comma_ints(args.sizes)
    report = run_preprocess(records, args.images, sizes, args.out, jobs=args.jobs)
    out = Path(args.out) / "report.json"
    out.write_text(report.to_json(), encoding="utf-8")
    log.info("preprocessed %d image(s), %d failure(s)",
             len(report.processed), len(report.failed))
    return EXIT_OK


def _split_scores(records, system, split_map, score_set):
    """Labels and score rows for the tune and validation subsets."""
    labeled = {rec.image_id: label for rec, label in records_for_system(records, system)}
    subsets = {}
    for set_name in ("tune", "validation"):
        ids = sorted(i for i, s in split_map.items() if s == set_name and i in labeled)
        missing = [i for i in ids if i not in score_set]
        if missing:
            raise RangeError(
                f"{len(missing)} {set_name} image(s) missing from scores file "
                f"(first: {missing[0]!r})")
        labels = np.array([labeled[i].index for i in ids], dtype=np.int64)
        subsets[set_name] = (ids, labels, score_set.matrix_for(ids))
    return subsets


def _cmd_eval(args) -> int:
    system = GradingSystem.from_name(args.system)
    records = _load_manifest(args.manifest, args.drop_flagged)
    split_map = parse_split(_read_text(args.split))
    score_set = parse_scores(_read_text(args.scores), expected_k=system.class_count)
    subsets = _split_scores(records, system, split_map, score_set)

    if args.mode == "binary":
        tune_ids, tune_labels, tune_probs = subsets["tune"]
        val_ids, val_labels, val_probs = subsets["validation"]
        patient_of = {rec.image_id: rec.patient_id for rec in records}
        ci_method = (CI_CLUSTER_BOOTSTRAP if args.ci_method == "bootstrap"
                     else CI_CLOPPER_PEARSON)
        report = evaluate_binary(
            (tune_labels, tune_probs[:, 1]),
            (val_labels, val_probs[:, 1]),
            system=system,
            input_size=args.size,
            target_sens=None if args.target_spec is not None else args.target_sens,
            target_spec=args.target_spec,
            ci_method=ci_method,
            validation_patients=[patient_of[i] for i in val_ids],
            n_boot=args.boot,
            seed=args.seed,
        )
    else:
        _, val_labels, val_probs = subsets["validation"]
        report = evaluate_multiclass((val_labels, val_probs), system,
                                     input_size=args.size)
    paths = write_report_files(report, args.out)
    log.info("wrote %d report file(s) under %s", len(paths), args.out)
    return EXIT_OK


def _cmd_synth_population(args) -> int:
    if args.preset:
        spec = preset_population(args.preset, n_patients=args.patients,
                                 seed=args.seed,
                                 images_per_patient=args.images_per_patient,
                                 gradable_rate=args.gradable_rate)
    else:
        if not args.system or not args.probs:
            raise RangeError("either --preset or both --system and --probs required")
        system = GradingSystem.from_name(args.system)
        spec = PopulationSpec(system=system, n_patients=args.patients,
                              stratum_probs=tuple(_comma_floats(args.probs)),
                              images_per_patient=args.images_per_patient,
                              gradable_rate=args.gradable_rate, seed=args.seed)
    records = gen_population(spec)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(serialize_manifest(records), encoding="utf-8")
    log.info("wrote %d record(s) to %s", len(records), out)
    return EXIT_OK


def _cmd_synth_scores(args) -> int:
    records = _load_manifest(args.manifest, drop_flagged=False)
    system = GradingSystem.from_name(args.system)
    score_set = scores_for_manifest(records, system, target_auc=args.target_auc,
                                    quality=args.quality, seed=args.seed)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(serialize_scores(score_set), encoding="utf-8")
    log.info("wrote scores for %d image(s) to %s", len(score_set.image_ids), out)
    return EXIT_OK


def _cmd_synth_images(args) -> int:
    from .preprocessing import encode_png  # local import keeps startup light

    records = _load_manifest(args.manifest, drop_flagged=False)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    brightness_by_class = None
    system = None
    if args.brightness_by_class:
        if not args.system:
            raise RangeError("--brightness-by-class requires --system")
        system = GradingSystem.from_name(args.system)
        brightness_by_class = _comma_floats(args.brightness_by_class)
        if len(brightness_by_class) != system.class_count:
            raise RangeError(
                f"--brightness-by-class needs {system.class_count} values for "
                f"{system.value}")
    labels = {}
    if system is not None:
        labels = {rec.image_id: label.index
                  for rec, label in records_for_system(records, system)}
    count = 0
    for index, rec in enumerate(sorted(records, key=lambda r: r.image_id)):
        brightness = 1.0
        if brightness_by_class is not None:
            if rec.image_id not in labels:
                continue
            brightness = brightness_by_class[labels[rec.image_id]]
        img = gen_fundus_image(args.width, args.height, args.radius,
                               annotation=args.annotation,
                               seed=args.seed + index, brightness=brightness)
        (out_dir / f"{rec.image_id}.png").write_bytes(encode_png(img))
        count += 1
    log.info("wrote %d synthetic image(s) to %s", count, out_dir)
    return EXIT_OK


def _cmd_report(args) -> int:
    payload = json.loads(_read_text(args.json))
    report = report_from_json_dict(payload)
    formats = tuple(f.strip() for f in args.formats.split(",") if f.strip())
    paths = write_report_files(report, args.out, formats=formats)
    log.info("re-rendered %d file(s) under %s", len(paths), args.out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser assembly
# ---------------------------------------------------------------------------


def build_parser() -> _Parser:
    parser = _Parser(prog="fundus-eval",
                     description="Diabetic retinopathy screening evaluation toolkit")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("split", parents=[], help="stratified patient-exclusive division")
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--system", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--fractions", default="0.70,0.10,0.20")
    p.add_argument("--tolerance", type=float, default=0.015)
    p.add_argument("--table-prefix", type=Path, default=None,
                   help="path prefix for the distribution tables (default: <out>_table)")
    p.add_argument("--drop-flagged", action="store_true",
                   help="drop rows with a nonempty disagreement column")
    p.set_defaults(func=_cmd_split)

    p = sub.add_parser("preprocess", help="crop and resize manifest images")
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--images", type=Path, required=True, help="directory of source images")
    p.add_argument("--sizes", default=",".join(str(s) for s in PRESET_SIZES))
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--drop-flagged", action="store_true")
    p.set_defaults(func=_cmd_preprocess)

    p = sub.add_parser("eval", help="evaluate scores against a split")
    p.add_argument("mode", choices=("binary", "multi"))
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--split", type=Path, required=True)
    p.add_argument("--scores", type=Path, required=True)
    p.add_argument("--system", required=True)
    p.add_argument("--out", type=Path, default=Path("."))
    p.add_argument("--size", default="orig", help="input-size tag used in file names")
    p.add_argument("--target-sens", type=float, default=0.900)
    p.add_argument("--target-spec", type=float, default=None)
    p.add_argument("--ci-method", choices=("clopper-pearson", "bootstrap"),
                   default="clopper-pearson")
    p.add_argument("--boot", type=int, default=2000, help="bootstrap replicates")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1,
                   help="accepted for parity; outputs never depend on it")
    p.add_argument("--drop-flagged", action="store_true")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("synth", help="synthetic data generators")
    synth_sub = p.add_subparsers(dest="synth_command", required=True)

    q = synth_sub.add_parser("population", help="generate a manifest")
    q.add_argument("--preset", choices=sorted(PRESET_MARGINALS), default=None)
    q.add_argument("--system", default=None)
    q.add_argument("--probs", default=None, help="comma-separated stratum probabilities")
    q.add_argument("--patients", type=int, default=14624)
    q.add_argument("--images-per-patient", type=int, default=4)
    q.add_argument("--gradable-rate", type=float, default=1.0)
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--out", type=Path, required=True)
    q.set_defaults(func=_cmd_synth_population)

    q = synth_sub.add_parser("scores", help="generate a scores CSV for a manifest")
    q.add_argument("--manifest", type=Path, required=True)
    q.add_argument("--system", required=True)
    q.add_argument("--target-auc", type=float, default=None, help="binary systems")
    q.add_argument("--quality", type=float, default=None, help="multiclass systems")
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--out", type=Path, required=True)
    q.set_defaults(func=_cmd_synth_scores)

    q = synth_sub.add_parser("images", help="generate disk images for a manifest")
    q.add_argument("--manifest", type=Path, required=True)
    q.add_argument("--out", type=Path, required=True)
    q.add_argument("--width", type=int, default=1000)
    q.add_argument("--height", type=int, default=800)
    q.add_argument("--radius", type=int, default=390)
    q.add_argument("--annotation", action="store_true")
    q.add_argument("--brightness-by-class", default=None,
                   help="comma-separated per-class brightness multipliers")
    q.add_argument("--system", default=None)
    q.add_argument("--seed", type=int, default=0)
    q.set_defaults(func=_cmd_synth_images)

    p = sub.add_parser("report", help="re-render a stored JSON report")
    p.add_argument("--json", type=Path, required=True)
    p.add_argument("--out", type=Path, default=Path("."))
    p.add_argument("--formats", default=",".join(REPORT_FORMATS))
    p.set_defaults(func=_cmd_report)

    return parser


def main(argv=None) -> int:
    _configure_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except FundusEvalError as exc:
        log.error("%s", exc)
        print(f"fundus-eval: error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        log.error("%s", exc)
        print(f"fundus-eval: i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


def entrypoint() -> None:
    sys.exit(main())
