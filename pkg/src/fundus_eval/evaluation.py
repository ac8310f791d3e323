"""Operating-point selection on the tuning set and end-to-end screening
evaluation of binary and multiclass grading systems.

The threshold is always chosen on the tuning set alone and then frozen for
validation; changing validation data can never move the operating point.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DegenerateClasses, RangeError
from .grading import GradingSystem
from .metrics import (
    CI_CLOPPER_PEARSON,
    CI_CLUSTER_BOOTSTRAP,
    ConfusionMatrix,
    Interval,
    RocCurve,
    auc,
    accuracy as matrix_accuracy,
    binary_rates,
    clopper_pearson,
    cluster_bootstrap_auc,
    confusion,
    macro_roc,
    quadratic_weighted_kappa,
    roc_curve,
)

TARGET_SENSITIVITY = "target_sensitivity"
TARGET_SPECIFICITY = "target_specificity"


@dataclass(frozen=True)
class OperatingPoint:
    threshold: float
    criterion: str
    target: float
    tuning_sensitivity: float
    tuning_specificity: float
    trivial: bool = False  # the all-positive (or all-negative) endpoint


def select_operating_point(
    tuning_curve: RocCurve, criterion: str, target: float
) -> OperatingPoint:
    """Pick the threshold meeting the target on the tuning curve.

    target_sensitivity: smallest tuning sensitivity >= target, ties broken
    by higher specificity. target_specificity: smallest tuning specificity
    >= target, ties broken by higher sensitivity. Sensitivity targets are
    always attainable (the all-positive endpoint has sensitivity 1); the
    returned point is flagged trivial when it is that degenerate endpoint.
    """
    if criterion not in (TARGET_SENSITIVITY, TARGET_SPECIFICITY):
        raise RangeError(f"unknown criterion {criterion!r}")
    if not 0.0 < target <= 1.0:
        raise RangeError(f"target must lie in (0, 1], got {target}")
    if tuning_curve.thresholds is None:
        raise RangeError("operating points need a thresholded curve")

    fpr, tpr, thr = tuning_curve.fpr, tuning_curve.tpr, tuning_curve.thresholds
    if criterion == TARGET_SENSITIVITY:
        ok = tpr >= target
        best_tpr = tpr[ok].min()
        tie = ok & (tpr == best_tpr)
        idx = int(np.nonzero(tie)[0][np.argmin(fpr[tie])])
    else:
        spec = 1.0 - fpr
        ok = spec >= target
        best_spec = spec[ok].min()
        tie = ok & (spec == best_spec)
        idx = int(np.nonzero(tie)[0][np.argmax(tpr[tie])])

    trivial = (fpr[idx] == 1.0 and tpr[idx] == 1.0) or (fpr[idx] == 0.0 and tpr[idx] == 0.0)
    return OperatingPoint(
        threshold=float(thr[idx]),
        criterion=criterion,
        target=target,
        tuning_sensitivity=float(tpr[idx]),
        tuning_specificity=float(1.0 - fpr[idx]),
        trivial=bool(trivial),
    )


@dataclass(frozen=True)
class BinaryReport:
    system: GradingSystem
    input_size: str
    n: int
    n_pos: int
    n_neg: int
    auc: float
    auc_ci: Interval
    sensitivity: float
    sensitivity_ci: Interval
    specificity: float
    specificity_ci: Interval
    accuracy: float
    accuracy_ci: Interval
    operating_point: OperatingPoint
    confusion: ConfusionMatrix
    roc: RocCurve

    def __post_init__(self):
        pairs = ((self.auc, self.auc_ci), (self.sensitivity, self.sensitivity_ci),
                 (self.specificity, self.specificity_ci),
                 (self.accuracy, self.accuracy_ci))
        for value, interval in pairs:
            if not interval.contains(value):
                raise RangeError(
                    f"interval ({interval.lo}, {interval.hi}) does not contain "
                    f"its point estimate {value}")


@dataclass(frozen=True)
class MulticlassReport:
    system: GradingSystem
    input_size: str
    n: int
    macro_auc: float
    per_class_auc: tuple[float, ...]
    accuracy: float
    quadratic_weighted_kappa: float
    confusion: ConfusionMatrix
    per_class_roc: tuple[RocCurve, ...]
    macro_curve: RocCurve


def _with_provenance(exc: Exception, which: str) -> Exception:
    return type(exc)(f"{which} set: {exc}")


def evaluate_binary(
    tuning: tuple[Sequence[int], Sequence[float]],
    validation: tuple[Sequence[int], Sequence[float]],
    *,
    system: GradingSystem,
    input_size: str = "orig",
    target_sens: float | None = 0.900,
    target_spec: float | None = None,
    ci_method: str = CI_CLOPPER_PEARSON,
    level: float = 0.95,
    validation_patients: Sequence[str] | None = None,
    n_boot: int = 2000,
    seed: int = 0,
) -> BinaryReport:
    """Operating point from the tuning set, all reported rates from validation.

    Interval methods: sensitivity over n_pos, specificity over n_neg and
    accuracy over n are always exact Clopper-Pearson. The AUC interval is
    Clopper-Pearson on round(auc * n) of n by default (the published-table
    convention) or a patient-level BCa cluster bootstrap with
    ci_method="cluster_bootstrap", which requires validation_patients.
    """
    if system.class_count != 2:
        raise RangeError(f"{system.value} is not a binary system")
    if (target_sens is None) == (target_spec is None):
        raise RangeError("exactly one of target_sens / target_spec must be set")
    try:
        tune_curve = roc_curve(*tuning)
    except DegenerateClasses as exc:
        raise _with_provenance(exc, "tuning") from None
    if target_sens is not None:
        point = select_operating_point(tune_curve, TARGET_SENSITIVITY, target_sens)
    else:
        point = select_operating_point(tune_curve, TARGET_SPECIFICITY, target_spec)

    val_labels = np.asarray(validation[0])
    val_scores = np.asarray(validation[1], dtype=float)
    try:
        val_curve = roc_curve(val_labels, val_scores)
    except DegenerateClasses as exc:
        raise _with_provenance(exc, "validation") from None

    predictions = (val_scores >= point.threshold).astype(np.int64)
    cm = confusion(val_labels, predictions, 2)
    sens, spec, acc = binary_rates(cm)

    n = int(val_labels.size)
    n_pos = int(val_labels.sum())
    n_neg = n - n_pos
    tp = int(cm.counts[1, 1])
    tn = int(cm.counts[0, 0])
    auc_value = auc(val_curve)

    if ci_method == CI_CLOPPER_PEARSON:
        auc_ci = clopper_pearson(round(auc_value * n), n, level)
    elif ci_method == CI_CLUSTER_BOOTSTRAP:
        if validation_patients is None:
            raise RangeError("cluster bootstrap needs validation_patients")
        auc_ci = cluster_bootstrap_auc(val_labels, val_scores, validation_patients,
                                       n_boot=n_boot, seed=seed, level=level)
    else:
        raise RangeError(f"unknown ci method {ci_method!r}")

    return BinaryReport(
        system=system,
        input_size=input_size,
        n=n, n_pos=n_pos, n_neg=n_neg,
        auc=auc_value, auc_ci=auc_ci,
        sensitivity=sens, sensitivity_ci=clopper_pearson(tp, n_pos, level),
        specificity=spec, specificity_ci=clopper_pearson(tn, n_neg, level),
        accuracy=acc, accuracy_ci=clopper_pearson(tp + tn, n, level),
        operating_point=point,
        confusion=cm,
        roc=val_curve,
    )


def evaluate_multiclass(
    validation: tuple[Sequence[int], np.ndarray],
    system: GradingSystem,
    input_size: str = "orig",
) -> MulticlassReport:
    """Argmax predictions, one-vs-all ROC per class and the macro average."""
    labels = np.asarray(validation[0])
    probs = np.asarray(validation[1], dtype=float)
    k = system.class_count
    if probs.ndim != 2 or probs.shape[1] != k:
        raise RangeError(f"score matrix must be (n, {k}) for {system.value}")
    if labels.shape != (probs.shape[0],):
        raise RangeError("labels must align with the score matrix")

    predictions = probs.argmax(axis=1)  # ties resolve to the lower class index
    cm = confusion(labels, predictions, k)

    per_class = [((labels == c).astype(np.int64), probs[:, c]) for c in range(k)]
    curves = []
    aucs = []
    for c, (one_vs_all, class_scores) in enumerate(per_class):
        try:
            curve = roc_curve(one_vs_all, class_scores)
        except DegenerateClasses as exc:
            raise DegenerateClasses(f"class {c}: {exc}") from None
        curves.append(curve)
        aucs.append(auc(curve))
    macro_curve, macro_area = macro_roc(per_class)

    return MulticlassReport(
        system=system,
        input_size=input_size,
        n=int(labels.size),
        macro_auc=macro_area,
        per_class_auc=tuple(aucs),
        accuracy=matrix_accuracy(cm),
        quadratic_weighted_kappa=quadratic_weighted_kappa(cm),
        confusion=cm,
        per_class_roc=tuple(curves),
        macro_curve=macro_curve,
    )
