"""Report emission: delimited tables (CSV), JSON, aligned plain text and
ROC figures rendered to standalone SVG files.

Figures are drawn with matplotlib onto an 800x800pt canvas. Output bytes
are deterministic for a given report: the SVG hash salt is pinned, fonts
are referenced as text rather than embedded glyph paths, and the Date
metadata is suppressed. Every ROC curve is wrapped in a group whose SVG id
starts with "curve-" (the chance diagonal gets id "diagonal"), which keeps
the figures structurally checkable.
"""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

import matplotlib
import numpy as np
from matplotlib.figure import Figure

from .errors import FatalFormat, RangeError
from .evaluation import BinaryReport, MulticlassReport, OperatingPoint
from .grading import GradingSystem
from .metrics import ConfusionMatrix, Interval, RocCurve

FIGURE_SIDE_PT = 800.0
_SVG_RC = {
    "svg.hashsalt": "fundus-eval",
    "svg.fonttype": "none",
    "font.family": "DejaVu Sans",
}

REPORT_FORMATS = ("csv", "json", "txt", "svg")


def _fmt(value: float, decimals: int = 3) -> str:
    return f"{value:.{decimals}f}"


def _ci_str(interval: Interval) -> str:
    return f"({_fmt(interval.lo)}-{_fmt(interval.hi)})"


# ---------------------------------------------------------------------------
# Delimited and text tables
# ---------------------------------------------------------------------------


def binary_report_csv(report: BinaryReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([
        "system", "input_size", "n", "n_pos", "n_neg",
        "auc", "auc_lo", "auc_hi",
        "sensitivity", "sensitivity_lo", "sensitivity_hi",
        "specificity", "specificity_lo", "specificity_hi",
        "accuracy", "accuracy_lo", "accuracy_hi",
        "threshold", "criterion", "target",
        "tuning_sensitivity", "tuning_specificity",
    ])
    p = report.operating_point
    writer.writerow([
        report.system.value, report.input_size, report.n, report.n_pos, report.n_neg,
        _fmt(report.auc, 6), _fmt(report.auc_ci.lo, 6), _fmt(report.auc_ci.hi, 6),
        _fmt(report.sensitivity, 6), _fmt(report.sensitivity_ci.lo, 6),
        _fmt(report.sensitivity_ci.hi, 6),
        _fmt(report.specificity, 6), _fmt(report.specificity_ci.lo, 6),
        _fmt(report.specificity_ci.hi, 6),
        _fmt(report.accuracy, 6), _fmt(report.accuracy_ci.lo, 6),
        _fmt(report.accuracy_ci.hi, 6),
        repr(p.threshold), p.criterion, _fmt(p.target, 3),
        _fmt(p.tuning_sensitivity, 6), _fmt(p.tuning_specificity, 6),
    ])
    return buf.getvalue()


def binary_report_text(report: BinaryReport) -> str:
    p = report.operating_point
    cells = [
        ("System", report.system.value),
        ("Input size", report.input_size),
        ("AUC", f"{_fmt(report.auc)} {_ci_str(report.auc_ci)}"),
        ("Sensitivity", f"{_fmt(report.sensitivity)} {_ci_str(report.sensitivity_ci)}"),
        ("Specificity", f"{_fmt(report.specificity)} {_ci_str(report.specificity_ci)}"),
        ("Accuracy", f"{_fmt(report.accuracy)} {_ci_str(report.accuracy_ci)}"),
    ]
    widths = [max(len(h), len(v)) for h, v in cells]
    lines = [
        "  ".join(h.ljust(w) for (h, _), w in zip(cells, widths)).rstrip(),
        "  ".join(v.ljust(w) for (_, v), w in zip(cells, widths)).rstrip(),
        "",
        f"Validation: n={report.n} (pos={report.n_pos}, neg={report.n_neg}); "
        f"CI level {report.auc_ci.level:g}, AUC method {report.auc_ci.method}",
        f"Operating point: threshold={p.threshold!r} criterion={p.criterion} "
        f"target={_fmt(p.target)} tuning sens/spec="
        f"{_fmt(p.tuning_sensitivity)}/{_fmt(p.tuning_specificity)}"
        + (" [trivial endpoint]" if p.trivial else ""),
    ]
    return "\n".join(lines) + "\n"


def multiclass_report_csv(report: MulticlassReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    header = ["system", "input_size", "n", "macro_auc", "accuracy",
              "quadratic_weighted_kappa"]
    header += [f"auc_class_{c}" for c in range(report.system.class_count)]
    writer.writerow(header)
    row = [report.system.value, report.input_size, report.n,
           _fmt(report.macro_auc, 6), _fmt(report.accuracy, 6),
           _fmt(report.quadratic_weighted_kappa, 6)]
    row += [_fmt(a, 6) for a in report.per_class_auc]
    writer.writerow(row)
    return buf.getvalue()


def multiclass_report_text(report: MulticlassReport) -> str:
    cells = [
        ("System", report.system.value),
        ("Input size", report.input_size),
        ("Macro-AUC", _fmt(report.macro_auc)),
        ("Accuracy", _fmt(report.accuracy)),
        ("Quadratic-Weighted Kappa", _fmt(report.quadratic_weighted_kappa)),
    ]
    widths = [max(len(h), len(v)) for h, v in cells]
    lines = [
        "  ".join(h.ljust(w) for (h, _), w in zip(cells, widths)).rstrip(),
        "  ".join(v.ljust(w) for (_, v), w in zip(cells, widths)).rstrip(),
        "",
        "Confusion matrix (rows = ground truth, columns = predicted):",
    ]
    counts = report.confusion.counts
    width = max(5, len(str(int(counts.max()))) + 1)
    header = " " * 6 + "".join(str(c).rjust(width) for c in range(report.system.class_count))
    lines.append(header)
    for r in range(report.system.class_count):
        lines.append(str(r).rjust(6) + "".join(str(int(v)).rjust(width) for v in counts[r]))
    return "\n".join(lines) + "\n"


def confusion_csv(cm: ConfusionMatrix) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["truth\\pred"] + [str(c) for c in range(cm.k)])
    for r in range(cm.k):
        writer.writerow([str(r)] + [str(int(v)) for v in cm.counts[r]])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# JSON round trip
# ---------------------------------------------------------------------------


def _interval_dict(interval: Interval) -> dict:
    return {"lo": interval.lo, "hi": interval.hi,
            "level": interval.level, "method": interval.method}


def _interval_from(payload: dict) -> Interval:
    return Interval(payload["lo"], payload["hi"], payload["level"], payload["method"])


def _roc_dict(curve: RocCurve) -> dict:
    return {"fpr": [float(v) for v in curve.fpr],
            "tpr": [float(v) for v in curve.tpr],
            "n_pos": curve.n_pos, "n_neg": curve.n_neg}


def _roc_from(payload: dict) -> RocCurve:
    return RocCurve(fpr=np.asarray(payload["fpr"]), tpr=np.asarray(payload["tpr"]),
                    thresholds=None, n_pos=payload["n_pos"], n_neg=payload["n_neg"])


def binary_report_json_dict(report: BinaryReport) -> dict:
    p = report.operating_point
    threshold = p.threshold if math.isfinite(p.threshold) else None
    return {
        "kind": "binary",
        "system": report.system.value,
        "input_size": report.input_size,
        "counts": {"n": report.n, "n_pos": report.n_pos, "n_neg": report.n_neg},
        "auc": report.auc, "auc_ci": _interval_dict(report.auc_ci),
        "sensitivity": report.sensitivity,
        "sensitivity_ci": _interval_dict(report.sensitivity_ci),
        "specificity": report.specificity,
        "specificity_ci": _interval_dict(report.specificity_ci),
        "accuracy": report.accuracy,
        "accuracy_ci": _interval_dict(report.accuracy_ci),
        "operating_point": {
            "threshold": threshold,
            "criterion": p.criterion,
            "target": p.target,
            "tuning_sensitivity": p.tuning_sensitivity,
            "tuning_specificity": p.tuning_specificity,
            "trivial": p.trivial,
        },
        "confusion": [[int(v) for v in row] for row in report.confusion.counts],
        "roc": _roc_dict(report.roc),
    }


def multiclass_report_json_dict(report: MulticlassReport) -> dict:
    return {
        "kind": "multiclass",
        "system": report.system.value,
        "input_size": report.input_size,
        "n": report.n,
        "macro_auc": report.macro_auc,
        "per_class_auc": list(report.per_class_auc),
        "accuracy": report.accuracy,
        "quadratic_weighted_kappa": report.quadratic_weighted_kappa,
        "confusion": [[int(v) for v in row] for row in report.confusion.counts],
        "per_class_roc": [_roc_dict(c) for c in report.per_class_roc],
        "macro_roc": _roc_dict(report.macro_curve),
    }


def report_json(report) -> str:
    if isinstance(report, BinaryReport):
        payload = binary_report_json_dict(report)
    elif isinstance(report, MulticlassReport):
        payload = multiclass_report_json_dict(report)
    else:
        raise RangeError(f"not a report: {type(report).__name__}")
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def report_from_json_dict(payload: dict):
    """Rebuild a report object from its JSON form (for re-rendering)."""
    kind = payload.get("kind")
    if kind == "binary":
        op = payload["operating_point"]
        threshold = op["threshold"]
        return BinaryReport(
            system=GradingSystem.from_name(payload["system"]),
            input_size=payload["input_size"],
            n=payload["counts"]["n"],
            n_pos=payload["counts"]["n_pos"],
            n_neg=payload["counts"]["n_neg"],
            auc=payload["auc"], auc_ci=_interval_from(payload["auc_ci"]),
            sensitivity=payload["sensitivity"],
            sensitivity_ci=_interval_from(payload["sensitivity_ci"]),
            specificity=payload["specificity"],
            specificity_ci=_interval_from(payload["specificity_ci"]),
            accuracy=payload["accuracy"],
            accuracy_ci=_interval_from(payload["accuracy_ci"]),
            operating_point=OperatingPoint(
                threshold=math.inf if threshold is None else threshold,
                criterion=op["criterion"], target=op["target"],
                tuning_sensitivity=op["tuning_sensitivity"],
                tuning_specificity=op["tuning_specificity"],
                trivial=op["trivial"],
            ),
            confusion=ConfusionMatrix(np.asarray(payload["confusion"])),
            roc=_roc_from(payload["roc"]),
        )
    if kind == "multiclass":
        return MulticlassReport(
            system=GradingSystem.from_name(payload["system"]),
            input_size=payload["input_size"],
            n=payload["n"],
            macro_auc=payload["macro_auc"],
            per_class_auc=tuple(payload["per_class_auc"]),
            accuracy=payload["accuracy"],
            quadratic_weighted_kappa=payload["quadratic_weighted_kappa"],
            confusion=ConfusionMatrix(np.asarray(payload["confusion"])),
            per_class_roc=tuple(_roc_from(c) for c in payload["per_class_roc"]),
            macro_curve=_roc_from(payload["macro_roc"]),
        )
    raise FatalFormat(f"unknown report kind {kind!r}")


# ---------------------------------------------------------------------------
# ROC figures
# ---------------------------------------------------------------------------


def _new_axes():
    side_inches = FIGURE_SIDE_PT / 72.0
    fig = Figure(figsize=(side_inches, side_inches))
    ax = fig.add_axes((0.10, 0.08, 0.86, 0.86))
    ax.set_xlim(0.0, 1.0)
    ax.set_ylim(0.0, 1.0)
    ax.set_xlabel("False positive rate")
    ax.set_ylabel("True positive rate")
    ax.plot([0.0, 1.0], [0.0, 1.0], linestyle="--", linewidth=1.0,
            color="0.6", gid="diagonal", zorder=1)
    return fig, ax


def roc_figure_binary(report: BinaryReport) -> Figure:
    fig, ax = _new_axes()
    name = f"{report.system.value.upper()} {report.input_size}"
    ax.plot(report.roc.fpr, report.roc.tpr, linewidth=1.8, color="#1f77b4",
            gid=f"curve-{report.system.value}",
            label=f"{name} ({_fmt(report.auc)})")
    ax.set_title(f"ROC: {name}")
    ax.legend(loc="lower right")
    return fig


_CLASS_COLORS = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd")


def roc_figure_multiclass(report: MulticlassReport) -> Figure:
    fig, ax = _new_axes()
    names = report.system.class_names
    for c, curve in enumerate(report.per_class_roc):
        ax.plot(curve.fpr, curve.tpr, linewidth=1.4,
                color=_CLASS_COLORS[c % len(_CLASS_COLORS)],
                gid=f"curve-class-{c}",
                label=f"{names[c]} ({_fmt(report.per_class_auc[c])})")
    ax.plot(report.macro_curve.fpr, report.macro_curve.tpr, linewidth=2.2,
            color="black", linestyle=(0, (4, 2)), gid="curve-macro-average",
            label=f"macro average ({_fmt(report.macro_auc)})")
    ax.set_title(f"ROC: {report.system.value.upper()} {report.input_size}")
    ax.legend(loc="lower right")
    return fig


def save_roc_svg(fig: Figure, path: Path) -> None:
    with matplotlib.rc_context(_SVG_RC):
        fig.savefig(path, format="svg", metadata={"Date": None})


# ---------------------------------------------------------------------------
# File tree emission
# ---------------------------------------------------------------------------


def write_report_files(
    report, out_dir: Path | str, formats=REPORT_FORMATS
) -> list[Path]:
    """Write report/<stem>.{csv,json,txt}, roc/<stem>.svg, confusion/<stem>.csv."""
    out_dir = Path(out_dir)
    unknown = set(formats) - set(REPORT_FORMATS)
    if unknown:
        raise RangeError(f"unknown formats: {sorted(unknown)}")
    binary = isinstance(report, BinaryReport)
    if not binary and not isinstance(report, MulticlassReport):
        raise RangeError(f"not a report: {type(report).__name__}")
    stem = f"{report.system.value}_{report.input_size}"
    written: list[Path] = []

    def emit(path: Path, text: str):
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
        written.append(path)

    if "csv" in formats:
        emit(out_dir / "report" / f"{stem}.csv",
             binary_report_csv(report) if binary else multiclass_report_csv(report))
        emit(out_dir / "confusion" / f"{stem}.csv", confusion_csv(report.confusion))
    if "json" in formats:
        emit(out_dir / "report" / f"{stem}.json", report_json(report))
    if "txt" in formats:
        emit(out_dir / "report" / f"{stem}.txt",
             binary_report_text(report) if binary else multiclass_report_text(report))
    if "svg" in formats:
        svg_path = out_dir / "roc" / f"{stem}.svg"
        svg_path.parent.mkdir(parents=True, exist_ok=True)
        fig = roc_figure_binary(report) if binary else roc_figure_multiclass(report)
        save_roc_svg(fig, svg_path)
        written.append(svg_path)
    return written
