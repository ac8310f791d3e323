"""Seed-deterministic synthetic data: populations with known grade marginals,
binormal binary scores with a chosen AUC, ordinal score vectors of tunable
quality, and fundus-like disk images for the preprocessing pipeline.

Every generator is a pure function of (spec, seed), so pipelines built on
them are reproducible byte for byte.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import RangeError
from .grading import GradeRecord, GradingSystem, records_for_system
from .metrics import ScoreSet, norm_ppf

_EYE_FIELD_CYCLE = (("L", "fovea"), ("L", "optic_disc"),
                    ("R", "fovea"), ("R", "optic_disc"))

# Shipped per-class image-marginal presets for each grading system,
# matching the published screening-dataset division tables.
PRESET_MARGINALS: dict[str, tuple[GradingSystem, tuple[float, ...]]] = {
    "table1-rdr": (GradingSystem.RDR, (20005 / 35630, 15625 / 35630)),
    "table1-pirc": (GradingSystem.PIRC,
                    (15962 / 35630, 4043 / 35630, 13130 / 35630,
                     2087 / 35630, 408 / 35630)),
    "table1-rdme": (GradingSystem.RDME, (30094 / 35630, 5536 / 35630)),
    "table1-pimec": (GradingSystem.PIMEC,
                     (30094 / 35630, 2233 / 35630, 2226 / 35630, 1077 / 35630)),
    "table1-qrdr": (GradingSystem.QRDR,
                    (5492 / 41122, 20005 / 41122, 15625 / 41122)),
}

# marginal pirc distribution within the non-referable / referable bands,
# used to fill in plausible clinical grades behind a binary class draw
_PIRC_LOW = np.array([15962, 4043], dtype=float)
_PIRC_LOW /= _PIRC_LOW.sum()
_PIRC_HIGH = np.array([13130, 2087, 408], dtype=float)
_PIRC_HIGH /= _PIRC_HIGH.sum()
_PIMEC_MARGINAL = np.array([30094, 2233, 2226, 1077], dtype=float)
_PIMEC_MARGINAL /= _PIMEC_MARGINAL.sum()
_PIMEC_HIGH = np.array([2233, 2226, 1077], dtype=float)
_PIMEC_HIGH /= _PIMEC_HIGH.sum()
_PIRC_MARGINAL = np.array([15962, 4043, 13130, 2087, 408], dtype=float)
_PIRC_MARGINAL /= _PIRC_MARGINAL.sum()


@dataclass(frozen=True)
class PopulationSpec:
    """How to synthesize a screening population for one grading system."""

    system: GradingSystem
    n_patients: int
    stratum_probs: tuple[float, ...]
    images_per_patient: int = 4
    gradable_rate: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.n_patients < 1:
            raise RangeError(f"n_patients must be >= 1, got {self.n_patients}")
        if self.images_per_patient < 1:
            raise RangeError("images_per_patient must be >= 1")
        if len(self.stratum_probs) != self.system.class_count:
            raise RangeError(
                f"{self.system.value} needs {self.system.class_count} stratum "
                f"probabilities, got {len(self.stratum_probs)}")
        if any(p < 0 for p in self.stratum_probs):
            raise RangeError("stratum probabilities must be nonnegative")
        if abs(sum(self.stratum_probs) - 1.0) > 1e-9:
            raise RangeError(f"stratum probabilities must sum to 1, "
                             f"got {sum(self.stratum_probs)}")
        if not 0.0 < self.gradable_rate <= 1.0:
            raise RangeError("gradable_rate must lie in (0, 1]")


def preset_population(
    name: str,
    n_patients: int = 14624,
    seed: int = 0,
    images_per_patient: int = 4,
    gradable_rate: float = 1.0,
) -> PopulationSpec:
    if name not in PRESET_MARGINALS:
        raise RangeError(f"unknown preset {name!r}; expected one of "
                         f"{', '.join(sorted(PRESET_MARGINALS))}")
    system, probs = PRESET_MARGINALS[name]
    return PopulationSpec(system=system, n_patients=n_patients,
                          stratum_probs=probs, seed=seed,
                          images_per_patient=images_per_patient,
                          gradable_rate=gradable_rate)


def _grades_for_class(system: GradingSystem, index: int, rng: np.random.Generator):
    """Plausible (gradable, pirc, pimec) realizing one class of `system`."""
    if system is GradingSystem.QRDR and index == 0:
        return False, None, None
    if system is GradingSystem.PIRC:
        pirc = index
    elif system in (GradingSystem.RDR, GradingSystem.QRDR):
        referable = index >= (2 if system is GradingSystem.QRDR else 1)
        if referable:
            pirc = 2 + int(rng.choice(3, p=_PIRC_HIGH))
        else:
            pirc = int(rng.choice(2, p=_PIRC_LOW))
    else:
        pirc = int(rng.choice(5, p=_PIRC_MARGINAL))
    if system is GradingSystem.PIMEC:
        pimec = index
    elif system is GradingSystem.RDME:
        pimec = 0 if index == 0 else 1 + int(rng.choice(3, p=_PIMEC_HIGH))
    else:
        pimec = int(rng.choice(4, p=_PIMEC_MARGINAL))
    return True, pirc, pimec


def gen_population(spec: PopulationSpec) -> list[GradeRecord]:
    """Synthesize manifest records whose image marginals follow the spec.

    Every image of a patient carries the patient's stratum class, so the
    splitter's max-class stratum recovers the drawn stratum exactly and the
    image-level class marginals converge to stratum_probs. The clinical
    grades behind a class still vary (a referable image draws its pirc from
    the referable band), so other systems see heterogeneous labels.
    """
    rng = np.random.default_rng(spec.seed)
    id_width = max(6, len(str(spec.n_patients)))
    records: list[GradeRecord] = []
    ungradable_ok = not spec.system.includes_ungradable
    for p in range(spec.n_patients):
        patient_id = f"P{p:0{id_width}d}"
        stratum = int(rng.choice(spec.system.class_count, p=spec.stratum_probs))
        for i in range(spec.images_per_patient):
            eye, fld = _EYE_FIELD_CYCLE[i % len(_EYE_FIELD_CYCLE)]
            image_id = f"{patient_id}_{i:02d}_{eye}_{fld}"
            # image 0 stays gradable so the stratum is always attained
            drop = (ungradable_ok and i > 0 and spec.gradable_rate < 1.0
                    and rng.random() >= spec.gradable_rate)
            if drop:
                records.append(GradeRecord(image_id, patient_id, eye, fld,
                                           gradable=False))
                continue
            gradable, pirc, pimec = _grades_for_class(spec.system, stratum, rng)
            records.append(GradeRecord(image_id, patient_id, eye, fld,
                                       gradable=gradable, pirc=pirc, pimec=pimec))
    return records


# ---------------------------------------------------------------------------
# Binormal binary scores
# ---------------------------------------------------------------------------


def binormal_mu(target_auc: float) -> float:
    """Class separation giving the requested AUC in the equal-variance
    binormal model: mu = sqrt(2) * Phi^-1(auc)."""
    if not 0.5 <= target_auc < 1.0:
        raise RangeError(f"target_auc must lie in [0.5, 1), got {target_auc}")
    if target_auc == 0.5:
        return 0.0
    return math.sqrt(2.0) * norm_ppf(target_auc)


@dataclass(frozen=True)
class BinormalSpec:
    n_pos: int
    n_neg: int
    target_auc: float
    seed: int = 0

    def __post_init__(self):
        if self.n_pos < 1 or self.n_neg < 1:
            raise RangeError("need at least one item per class")
        binormal_mu(self.target_auc)  # validates the range

    @property
    def mu(self) -> float:
        return binormal_mu(self.target_auc)


def _squash(x: np.ndarray) -> np.ndarray:
    """Logistic map to (0, 1); monotone, so AUC is preserved."""
    return 1.0 / (1.0 + np.exp(-x))


def gen_binary_scores(spec: BinormalSpec) -> tuple[np.ndarray, np.ndarray]:
    """Labels and positive-class scores: negatives N(0,1), positives N(mu,1),
    squashed into (0, 1)."""
    rng = np.random.default_rng(spec.seed)
    neg = rng.standard_normal(spec.n_neg)
    pos = rng.standard_normal(spec.n_pos) + spec.mu
    labels = np.concatenate([np.zeros(spec.n_neg, dtype=np.int64),
                             np.ones(spec.n_pos, dtype=np.int64)])
    scores = _squash(np.concatenate([neg, pos]))
    return labels, scores


# ---------------------------------------------------------------------------
# Ordinal score vectors
# ---------------------------------------------------------------------------


def gen_ordinal_scores(
    labels: Sequence[int], k: int, quality: float, seed: int = 0
) -> np.ndarray:
    """Probability vectors from a latent ordinal model.

    The latent position is class + noise/quality and the class probabilities
    are a softmax over negative quality-scaled squared distances to each
    class index. quality 0 yields exactly uniform vectors; large quality
    concentrates all mass on the true class.
    """
    if k < 2:
        raise RangeError("need at least two classes")
    if quality < 0:
        raise RangeError(f"quality must be >= 0, got {quality}")
    y = np.asarray(labels)
    if y.size and (y.min() < 0 or y.max() >= k):
        raise RangeError(f"labels must lie in [0, {k})")
    if quality == 0.0:
        return np.full((y.size, k), 1.0 / k)
    rng = np.random.default_rng(seed)
    latent = y + rng.standard_normal(y.size) / quality
    logits = -quality * (latent[:, None] - np.arange(k)[None, :]) ** 2
    logits -= logits.max(axis=1, keepdims=True)
    probs = np.exp(logits)
    probs /= probs.sum(axis=1, keepdims=True)
    return probs


def scores_for_manifest(
    records: Sequence[GradeRecord],
    system: GradingSystem,
    *,
    target_auc: float | None = None,
    quality: float | None = None,
    seed: int = 0,
) -> ScoreSet:
    """Score vectors for every record usable under `system`.

    Binary systems take target_auc (binormal model); multiclass systems take
    quality (latent ordinal model). Records are canonically ordered by
    image_id so output is independent of input order.
    """
    labeled = sorted(records_for_system(records, system),
                     key=lambda item: item[0].image_id)
    if not labeled:
        raise RangeError(f"no records usable under {system.value}")
    image_ids = [rec.image_id for rec, _ in labeled]
    y = np.array([label.index for _, label in labeled])
    k = system.class_count
    if k == 2:
        if target_auc is None:
            raise RangeError(f"{system.value} is binary; target_auc required")
        mu = binormal_mu(target_auc)
        rng = np.random.default_rng(seed)
        raw = rng.standard_normal(y.size) + mu * y
        p1 = _squash(raw)
        probs = np.column_stack([1.0 - p1, p1])
    else:
        if quality is None:
            raise RangeError(f"{system.value} is multiclass; quality required")
        probs = gen_ordinal_scores(y, k, quality, seed)
    return ScoreSet(tuple(image_ids), probs)


# ---------------------------------------------------------------------------
# Fundus-like disk images
# ---------------------------------------------------------------------------

_DISK_RGB = np.array([185.0, 95.0, 50.0])
_NOISE_SIGMA = 12.0
_DISK_FLOOR = 32.0
_ANNOTATION_RGB = np.array([235.0, 235.0, 228.0])


def gen_fundus_image(
    width: int,
    height: int,
    disk_radius: int,
    annotation: bool = False,
    seed: int = 0,
    brightness: float = 1.0,
) -> np.ndarray:
    """Black frame with a textured bright disk at the center.

    With annotation=True a bright text-like block is placed in the top-left
    border, strictly outside the disk's bounding square, to exercise the
    annotation-removal guarantee of the cropper.
    """
    if width < 16 or height < 16:
        raise RangeError("frame must be at least 16x16")
    if disk_radius < 4:
        raise RangeError("disk radius must be >= 4")
    if 2 * disk_radius > min(width, height):
        raise RangeError(
            f"disk of radius {disk_radius} does not fit in {width}x{height}")
    if brightness <= 0:
        raise RangeError("brightness must be positive")

    rng = np.random.default_rng(seed)
    cx, cy = width // 2, height // 2
    yy, xx = np.ogrid[:height, :width]
    mask = (xx - cx) ** 2 + (yy - cy) ** 2 <= disk_radius ** 2

    img = np.zeros((height, width, 3), dtype=np.float64)
    texture = _DISK_RGB * brightness + rng.normal(0.0, _NOISE_SIGMA, (height, width, 3))
    img[mask] = np.clip(texture, _DISK_FLOOR, 255.0)[mask]

    if annotation:
        top_margin = cy - disk_radius
        if top_margin < 4:
            raise RangeError("no border room above the disk for an annotation")
        rows = slice(1, min(top_margin - 1, 9))
        cols = slice(4, min(width // 3, 96))
        block = np.zeros((rows.stop - rows.start, cols.stop - cols.start), dtype=bool)
        block[:, :] = rng.random(block.shape) < 0.75  # gappy, text-like
        patch = img[rows, cols]
        patch[block] = np.clip(
            _ANNOTATION_RGB + rng.normal(0.0, 6.0, (int(block.sum()), 3)), 180.0, 255.0)
        img[rows, cols] = patch

    return np.clip(np.rint(img), 0.0, 255.0).astype(np.uint8)
