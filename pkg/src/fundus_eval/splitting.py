"""Patient-exclusive, grade-stratified division into train/tune/validation.

All images of a patient land in the same set. Patients are bucketed by
stratum (the worst class among their images), shuffled deterministically
within each stratum, then assigned greedily so that each stratum's image
counts track the target fractions. A bounded repair pass of patient swaps
then pushes per-class image proportions across the three sets inside the
requested tolerance.
"""

from __future__ import annotations

import csv
import io
import random
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    EmptyPatient,
    FatalFormat,
    InfeasibleSplit,
    InvariantError,
    UnassignedRecord,
)
from .grading import ClassLabel, GradeRecord, GradingSystem

SET_NAMES = ("train", "tune", "validation")

# tolerance enforcement kicks in once a class has this many patients
# whose stratum is that class; rarer classes are balanced best-effort
MIN_PATIENTS_FOR_TOLERANCE = 20

MAX_REPAIR_MOVES = 1000
_CANDIDATES_PER_SIDE = 20
FRACTION_GUARD = 0.02


@dataclass(frozen=True)
class SplitSpec:
    fractions: tuple[float, float, float] = (0.70, 0.10, 0.20)
    seed: int = 0
    tolerance: float = 0.015

    def __post_init__(self):
        if len(self.fractions) != 3:
            raise InvariantError("exactly three fractions required")
        if any(not 0.0 < f < 1.0 for f in self.fractions):
            raise InvariantError(f"fractions must lie in (0, 1), got {self.fractions}")
        if abs(sum(self.fractions) - 1.0) > 1e-9:
            raise InvariantError(f"fractions must sum to 1, got {sum(self.fractions)}")
        if not 0.0 < self.tolerance <= 0.1:
            raise InvariantError(f"tolerance must lie in (0, 0.1], got {self.tolerance}")


def _percent(count: int, total: int) -> str:
    """Percentage rounded half-up to one decimal, as presented in the tables."""
    if total == 0:
        return "0.0"
    value = Decimal(count * 100) / Decimal(total)
    return str(value.quantize(Decimal("0.1"), rounding=ROUND_HALF_UP))


@dataclass(frozen=True)
class DistributionTable:
    """Per-set patient/image totals and per-class image counts."""

    system: GradingSystem
    patients: tuple[int, int, int]
    images: tuple[int, int, int]
    class_counts: tuple[tuple[int, ...], ...]  # [set][class]

    def class_percent(self, set_index: int, class_index: int) -> str:
        return _percent(self.class_counts[set_index][class_index],
                        self.images[set_index])

    def to_csv(self) -> str:
        k = self.system.class_count
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        header = ["set", "patients", "images", "images_pct"]
        for c in range(k):
            header += [f"grade_{c}", f"grade_{c}_pct"]
        writer.writerow(header)
        for j, name in enumerate(SET_NAMES):
            row = [name, self.patients[j], self.images[j],
                   "100" if self.images[j] else "0"]
            for c in range(k):
                row += [self.class_counts[j][c], self.class_percent(j, c)]
            writer.writerow(row)
        return buf.getvalue()

    def to_text(self) -> str:
        k = self.system.class_count
        labels = ["Patients, No."]
        rows = [[str(p) for p in self.patients]]
        labels.append("Images Total, No. (%)")
        rows.append([f"{n} (100)" if n else "0 (0)" for n in self.images])
        for c in range(k):
            labels.append(f"Images Grade {c}, No. (%)")
            rows.append([f"{self.class_counts[j][c]} ({self.class_percent(j, c)})"
                         for j in range(3)])
        head = ["Training", "Tuning", "Validation"]
        label_width = max(len(s) for s in labels)
        col_widths = [max(len(head[j]), max(len(r[j]) for r in rows)) for j in range(3)]
        lines = [f"{self.system.value.upper():<{label_width}}  "
                 + "  ".join(head[j].rjust(col_widths[j]) for j in range(3))]
        for label, row in zip(labels, rows):
            lines.append(f"{label:<{label_width}}  "
                         + "  ".join(row[j].rjust(col_widths[j]) for j in range(3)))
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class SplitAssignment:
    system: GradingSystem
    seed: int
    assignment: dict  # image_id -> set name
    distribution: DistributionTable

    def set_of(self, image_id: str) -> str:
        try:
            return self.assignment[image_id]
        except KeyError:
            raise UnassignedRecord(image_id) from None

    def image_ids(self, set_name: str) -> list[str]:
        return sorted(i for i, s in self.assignment.items() if s == set_name)


def patient_stratum(items: Sequence[tuple[GradeRecord, ClassLabel]]) -> int:
    """Stratum of one patient's records: the maximum class index."""
    if not items:
        raise EmptyPatient("patient group is empty")
    patient_ids = {rec.patient_id for rec, _ in items}
    if len(patient_ids) != 1:
        raise InvariantError(f"records of several patients mixed: {sorted(patient_ids)}")
    return max(label.index for _, label in items)


@dataclass
class _Block:
    """One patient's images, viewed through the chosen grading system."""

    patient_id: str
    image_ids: list
    class_counts: np.ndarray
    n_images: int
    stratum: int
    set_index: int = -1


def _group_blocks(items, k: int) -> list[_Block]:
    by_patient: dict[str, list] = {}
    for rec, label in sorted(items, key=lambda it: (it[0].patient_id, it[0].image_id)):
        by_patient.setdefault(rec.patient_id, []).append((rec, label))
    blocks = []
    for patient_id in sorted(by_patient):
        group = by_patient[patient_id]
        counts = np.zeros(k, dtype=np.int64)
        for _, label in group:
            counts[label.index] += 1
        blocks.append(_Block(
            patient_id=patient_id,
            image_ids=[rec.image_id for rec, _ in group],
            class_counts=counts,
            n_images=len(group),
            stratum=max(label.index for _, label in group),
        ))
    return blocks


def _class_deviations(set_class: np.ndarray, set_images: np.ndarray,
                      enforced: Sequence[int]):
    """Pairwise per-class image-proportion gaps over the enforced classes,
    as (gap, class, higher_set, lower_set) tuples sorted worst first."""
    gaps = []
    for c in enforced:
        for a in range(3):
            if set_images[a] == 0:
                continue
            for b in range(a + 1, 3):
                if set_images[b] == 0:
                    continue
                pa = set_class[a, c] / set_images[a]
                pb = set_class[b, c] / set_images[b]
                if pa >= pb:
                    gaps.append((pa - pb, c, a, b))
                else:
                    gaps.append((pb - pa, c, b, a))
    gaps.sort(key=lambda g: (-g[0], g[1], g[2], g[3]))
    return gaps


def _max_class_deviation(set_class: np.ndarray, set_images: np.ndarray,
                         enforced: Sequence[int]) -> float:
    gaps = _class_deviations(set_class, set_images, enforced)
    return gaps[0][0] if gaps else 0.0


def _max_fraction_deviation(set_images: np.ndarray, fractions) -> float:
    total = set_images.sum()
    if total == 0:
        return 0.0
    return float(max(abs(set_images[j] / total - fractions[j]) for j in range(3)))


def split(items: Sequence[tuple[GradeRecord, ClassLabel]], spec: SplitSpec) -> SplitAssignment:
    """Assign every labeled record to train/tune/validation.

    Deterministic in (items, spec): records are canonically sorted before
    the seeded shuffle, so input order does not matter. Raises
    InfeasibleSplit when the per-class tolerance cannot be met for classes
    with enough patients.
    """
    if not items:
        raise InvariantError("cannot split an empty record list")
    systems = {label.system for _, label in items}
    if len(systems) != 1:
        raise InvariantError("all labels must come from a single grading system")
    system = systems.pop()
    k = system.class_count

    blocks = _group_blocks(items, k)
    seen: set = set()
    for b in blocks:
        for image_id in b.image_ids:
            if image_id in seen:
                raise InvariantError(f"duplicate image_id {image_id!r}")
            seen.add(image_id)

    strata: dict[int, list[_Block]] = {}
    for b in blocks:
        strata.setdefault(b.stratum, []).append(b)

    rng = random.Random(spec.seed)
    set_images = np.zeros(3, dtype=np.int64)
    set_class = np.zeros((3, k), dtype=np.int64)
    for stratum in sorted(strata):
        bucket = strata[stratum]
        rng.shuffle(bucket)
        assigned = np.zeros(3, dtype=np.int64)
        total = 0
        for b in bucket:
            total += b.n_images
            deficits = [spec.fractions[j] * total - assigned[j] for j in range(3)]
            j = int(np.argmax(deficits))
            b.set_index = j
            assigned[j] += b.n_images
            set_images[j] += b.n_images
            set_class[j] += b.class_counts

    stratum_patients = np.zeros(k, dtype=np.int64)
    for b in blocks:
        stratum_patients[b.stratum] += 1
    enforced = [c for c in range(k) if stratum_patients[c] >= MIN_PATIENTS_FOR_TOLERANCE]

    deviation = _max_class_deviation(set_class, set_images, enforced)
    moves = 0
    while deviation > spec.tolerance and moves < MAX_REPAIR_MOVES:
        fraction_cap = max(FRACTION_GUARD,
                           _max_fraction_deviation(set_images, spec.fractions))
        best = None
        for gap, c, hi, lo in _class_deviations(set_class, set_images, enforced):
            if gap <= spec.tolerance:
                break
            # the (hi, lo) gap shrinks by draining class c out of hi into any
            # set, or pulling it into lo from any set, so try all three duos
            third = 3 - hi - lo
            for donor, receiver in ((hi, lo), (hi, third), (third, lo)):
                donor_blocks = sorted(
                    (b for b in blocks
                     if b.set_index == donor and b.class_counts[c] > 0),
                    key=lambda b: (-b.class_counts[c] / b.n_images, b.patient_id),
                )[:_CANDIDATES_PER_SIDE]
                receiver_blocks = sorted(
                    (b for b in blocks if b.set_index == receiver),
                    key=lambda b: (b.class_counts[c] / b.n_images, b.patient_id),
                )[:_CANDIDATES_PER_SIDE]
                for bh in donor_blocks:
                    for bl in receiver_blocks:
                        trial_images = set_images.copy()
                        trial_class = set_class.copy()
                        trial_images[donor] += bl.n_images - bh.n_images
                        trial_images[receiver] += bh.n_images - bl.n_images
                        trial_class[donor] += bl.class_counts - bh.class_counts
                        trial_class[receiver] += bh.class_counts - bl.class_counts
                        if (_max_fraction_deviation(trial_images, spec.fractions)
                                > fraction_cap):
                            continue
                        trial_dev = _max_class_deviation(trial_class, trial_images,
                                                         enforced)
                        if (trial_dev < deviation - 1e-12
                                and (best is None or trial_dev < best[0])):
                            best = (trial_dev, bh, bl, trial_images, trial_class)
            if best is not None:
                break
        if best is None:
            break
        deviation, bh, bl, set_images, set_class = best
        bh.set_index, bl.set_index = bl.set_index, bh.set_index
        moves += 1

    if enforced and deviation > spec.tolerance:
        raise InfeasibleSplit(
            f"per-class proportion deviation {deviation:.4f} exceeds tolerance "
            f"{spec.tolerance} after {moves} repair moves",
            best_deviation=deviation, tolerance=spec.tolerance)

    assignment = {}
    for b in blocks:
        name = SET_NAMES[b.set_index]
        for image_id in b.image_ids:
            assignment[image_id] = name
    table = _table_from_blocks(system, blocks)
    return SplitAssignment(system=system, seed=spec.seed,
                           assignment=assignment, distribution=table)


def _table_from_blocks(system: GradingSystem, blocks: Sequence[_Block]) -> DistributionTable:
    k = system.class_count
    patients = [0, 0, 0]
    images = [0, 0, 0]
    class_counts = np.zeros((3, k), dtype=np.int64)
    for b in blocks:
        patients[b.set_index] += 1
        images[b.set_index] += b.n_images
        class_counts[b.set_index] += b.class_counts
    return DistributionTable(
        system=system,
        patients=tuple(patients),
        images=tuple(images),
        class_counts=tuple(tuple(int(v) for v in row) for row in class_counts),
    )


def split_table(
    assignment: SplitAssignment, items: Sequence[tuple[GradeRecord, ClassLabel]]
) -> DistributionTable:
    """Recompute the distribution table of an assignment over `items`."""
    system = assignment.system
    k = system.class_count
    patients: list[set] = [set(), set(), set()]
    images = [0, 0, 0]
    class_counts = np.zeros((3, k), dtype=np.int64)
    for rec, label in items:
        name = assignment.set_of(rec.image_id)
        j = SET_NAMES.index(name)
        patients[j].add(rec.patient_id)
        images[j] += 1
        class_counts[j, label.index] += 1
    return DistributionTable(
        system=system,
        patients=tuple(len(p) for p in patients),
        images=tuple(images),
        class_counts=tuple(tuple(int(v) for v in row) for row in class_counts),
    )


# ---------------------------------------------------------------------------
# Split CSV wire format
# ---------------------------------------------------------------------------

SPLIT_COLUMNS = ("image_id", "set")


def serialize_split(assignment: SplitAssignment) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SPLIT_COLUMNS)
    for image_id in sorted(assignment.assignment):
        writer.writerow([image_id, assignment.assignment[image_id]])
    return buf.getvalue()


def parse_split(text: str) -> dict:
    """Parse a split CSV back into an image_id -> set-name map."""
    reader = csv.reader(io.StringIO(text))
    try:
        header = tuple(h.strip() for h in next(reader))
    except StopIteration:
        raise FatalFormat("split file is empty") from None
    if header != SPLIT_COLUMNS:
        raise FatalFormat(f"invalid split header {','.join(header)!r}; "
                          f"expected {','.join(SPLIT_COLUMNS)}")
    out = {}
    for line, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != 2:
            raise FatalFormat(f"line {line}: expected 2 cells, got {len(row)}")
        image_id, name = row[0].strip(), row[1].strip()
        if name not in SET_NAMES:
            raise FatalFormat(f"line {line}: unknown set {name!r}")
        if image_id in out:
            raise FatalFormat(f"line {line}: duplicate image_id {image_id!r}")
        out[image_id] = name
    return out
