"""Grading systems, grade records, manifest ingestion and label derivation.

Five systems are supported. Two carry the full clinical scales (pirc with
grades 0-4, pimec with grades 0-3); three are derived from them:

* rdr   - referable retinopathy: pirc >= 2 is referable
* rdme  - referable macular edema: pimec >= 1 is referable
* qrdr  - ungradable / non-referable / referable three-class system

Class indices are fixed; class names are presentation only.
"""

from __future__ import annotations

import csv
import enum
import io
from dataclasses import dataclass
from typing import Iterable, Mapping

from .errors import (
    FatalFormat,
    InvariantError,
    MissingGrade,
    RangeError,
    UngradableForSystem,
)

EYES = ("L", "R")
FIELDS = ("fovea", "optic_disc")

PIRC_MAX = 4
PIMEC_MAX = 3

# pirc grade at or above which retinopathy counts as referable
RDR_THRESHOLD = 2
# pimec grade at or above which macular edema counts as referable
RDME_THRESHOLD = 1


class GradingSystem(enum.Enum):
    PIRC = "pirc"
    PIMEC = "pimec"
    RDR = "rdr"
    RDME = "rdme"
    QRDR = "qrdr"

    @classmethod
    def from_name(cls, name: str) -> "GradingSystem":
        try:
            return cls(name.strip().lower())
        except ValueError:
            raise RangeError(f"unknown grading system {name!r}; expected one of "
                             f"{', '.join(s.value for s in cls)}") from None

    @property
    def class_count(self) -> int:
        return len(_CLASS_NAMES[self])

    @property
    def class_names(self) -> tuple[str, ...]:
        return _CLASS_NAMES[self]

    @property
    def includes_ungradable(self) -> bool:
        """Only qrdr keeps ungradable images (as its class 0)."""
        return self is GradingSystem.QRDR


_CLASS_NAMES: dict[GradingSystem, tuple[str, ...]] = {
    GradingSystem.PIRC: ("no apparent DR", "mild NPDR", "moderate NPDR",
                         "severe NPDR", "PDR"),
    GradingSystem.PIMEC: ("no apparent DME", "mild DME", "moderate DME",
                          "severe DME"),
    GradingSystem.RDR: ("NRDR", "RDR"),
    GradingSystem.RDME: ("NRDME", "RDME"),
    GradingSystem.QRDR: ("ungradable", "NRDR", "RDR"),
}


@dataclass(frozen=True)
class ClassLabel:
    system: GradingSystem
    index: int

    def __post_init__(self):
        if not 0 <= self.index < self.system.class_count:
            raise InvariantError(
                f"class index {self.index} out of range for {self.system.value} "
                f"(k={self.system.class_count})")

    @property
    def name(self) -> str:
        return self.system.class_names[self.index]


@dataclass(frozen=True)
class GradeRecord:
    """One image's identity, patient linkage, gradability and clinical grades."""

    image_id: str
    patient_id: str
    eye: str
    field: str
    gradable: bool
    pirc: int | None = None
    pimec: int | None = None

    def __post_init__(self):
        if not self.image_id:
            raise InvariantError("image_id must be nonempty")
        if not self.patient_id:
            raise InvariantError("patient_id must be nonempty")
        if self.eye not in EYES:
            raise InvariantError(f"eye must be one of {EYES}, got {self.eye!r}")
        if self.field not in FIELDS:
            raise InvariantError(f"field must be one of {FIELDS}, got {self.field!r}")
        if self.pirc is not None and not 0 <= self.pirc <= PIRC_MAX:
            raise InvariantError(f"pirc grade {self.pirc} out of range [0, {PIRC_MAX}]")
        if self.pimec is not None and not 0 <= self.pimec <= PIMEC_MAX:
            raise InvariantError(f"pimec grade {self.pimec} out of range [0, {PIMEC_MAX}]")
        if self.gradable and (self.pirc is None or self.pimec is None):
            missing = [name for name, value in (("pirc", self.pirc), ("pimec", self.pimec))
                       if value is None]
            raise InvariantError(
                f"gradable record must carry a {' and '.join(missing)} grade")
        if not self.gradable and (self.pirc is not None or self.pimec is not None):
            raise InvariantError(
                "ungradable record must not carry pirc or pimec grades")


def derive_class(system: GradingSystem, record: GradeRecord) -> ClassLabel:
    """Map a record's clinical grades onto one grading system's class index."""
    if system is GradingSystem.QRDR:
        if not record.gradable:
            return ClassLabel(system, 0)
        if record.pirc is None:
            raise MissingGrade(f"{record.image_id}: pirc grade required for qrdr")
        return ClassLabel(system, 2 if record.pirc >= RDR_THRESHOLD else 1)

    if not record.gradable:
        raise UngradableForSystem(
            f"{record.image_id}: {system.value} requires a gradable image")

    if system in (GradingSystem.PIRC, GradingSystem.RDR):
        if record.pirc is None:
            raise MissingGrade(f"{record.image_id}: pirc grade required for {system.value}")
        if system is GradingSystem.PIRC:
            return ClassLabel(system, record.pirc)
        return ClassLabel(system, int(record.pirc >= RDR_THRESHOLD))

    if record.pimec is None:
        raise MissingGrade(f"{record.image_id}: pimec grade required for {system.value}")
    if system is GradingSystem.PIMEC:
        return ClassLabel(system, record.pimec)
    return ClassLabel(system, int(record.pimec >= RDME_THRESHOLD))


def records_for_system(
    records: Iterable[GradeRecord], system: GradingSystem
) -> list[tuple[GradeRecord, ClassLabel]]:
    """Pair each usable record with its class under `system`.

    Ungradable records are dropped for every system except qrdr, which keeps
    them as its class 0. Dropping is filtering, not failure.
    """
    out = []
    for rec in records:
        if not rec.gradable and not system.includes_ungradable:
            continue
        out.append((rec, derive_class(system, rec)))
    return out


# ---------------------------------------------------------------------------
# Manifest CSV
# ---------------------------------------------------------------------------

MANIFEST_COLUMNS = ("image_id", "patient_id", "eye", "field", "gradable",
                    "pirc", "pimec")
DISAGREEMENT_COLUMN = "disagreement"


@dataclass(frozen=True)
class Diagnostic:
    """A row-level ingest problem, keyed by 1-based line number."""

    line: int
    message: str

    def __str__(self):
        return f"line {self.line}: {self.message}"


def _parse_grade(cell: str, name: str, maximum: int) -> int | None:
    cell = cell.strip()
    if cell == "":
        return None
    try:
        value = int(cell)
    except ValueError:
        raise InvariantError(f"{name} grade {cell!r} is not an integer") from None
    if not 0 <= value <= maximum:
        raise InvariantError(f"{name} grade {value} out of range [0, {maximum}]")
    return value


def parse_manifest(
    text: str, drop_flagged: bool = False
) -> tuple[list[GradeRecord], list[Diagnostic]]:
    """Parse manifest CSV text into records plus row-level diagnostics.

    The header must be exactly image_id,patient_id,eye,field,gradable,pirc,
    pimec with an optional trailing disagreement column. Malformed rows are
    rejected with a diagnostic naming the violated invariant; they are never
    silently coerced. With drop_flagged=True, rows with a nonempty
    disagreement cell are dropped (and noted).
    """
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise FatalFormat("manifest is empty; expected a header row") from None
    header = tuple(h.strip() for h in header)
    if header == MANIFEST_COLUMNS:
        has_flag = False
    elif header == MANIFEST_COLUMNS + (DISAGREEMENT_COLUMN,):
        has_flag = True
    else:
        raise FatalFormat(
            f"invalid manifest header {','.join(header)!r}; expected "
            f"{','.join(MANIFEST_COLUMNS)}[,{DISAGREEMENT_COLUMN}]")
    width = len(header)

    records: list[GradeRecord] = []
    diagnostics: list[Diagnostic] = []
    for line, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != width:
            diagnostics.append(Diagnostic(line, f"expected {width} cells, got {len(row)}"))
            continue
        if has_flag and row[7].strip():
            if drop_flagged:
                diagnostics.append(Diagnostic(line, "grader disagreement flagged; row dropped"))
                continue
        gradable_cell = row[4].strip()
        if gradable_cell not in ("0", "1"):
            diagnostics.append(Diagnostic(line, f"gradable must be 0 or 1, got {gradable_cell!r}"))
            continue
        try:
            record = GradeRecord(
                image_id=row[0].strip(),
                patient_id=row[1].strip(),
                eye=row[2].strip(),
                field=row[3].strip(),
                gradable=gradable_cell == "1",
                pirc=_parse_grade(row[5], "pirc", PIRC_MAX),
                pimec=_parse_grade(row[6], "pimec", PIMEC_MAX),
            )
        except InvariantError as exc:
            diagnostics.append(Diagnostic(line, str(exc)))
            continue
        records.append(record)
    return records, diagnostics


def serialize_manifest(
    records: Iterable[GradeRecord],
    disagreement: Mapping[str, str] | None = None,
) -> str:
    """Inverse of parse_manifest on valid records (round-trips exactly)."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    columns = MANIFEST_COLUMNS + ((DISAGREEMENT_COLUMN,) if disagreement else ())
    writer.writerow(columns)
    for rec in records:
        row = [
            rec.image_id,
            rec.patient_id,
            rec.eye,
            rec.field,
            "1" if rec.gradable else "0",
            "" if rec.pirc is None else str(rec.pirc),
            "" if rec.pimec is None else str(rec.pimec),
        ]
        if disagreement:
            row.append(disagreement.get(rec.image_id, ""))
        writer.writerow(row)
    return buf.getvalue()


# ---------------------------------------------------------------------------
# Messidor label translation
# ---------------------------------------------------------------------------

MESSIDOR_COLUMNS = ("image_id", "retinopathy_grade", "edema_risk")

MESSIDOR_RETINOPATHY_MAX = 3
MESSIDOR_EDEMA_MAX = 2


def map_messidor(retinopathy_grade: int, edema_risk: int) -> tuple[ClassLabel, ClassLabel]:
    """Translate Messidor grades to (rdr, rdme) labels.

    Decision table: retinopathy grade {0,1} -> NRDR, {2,3} -> RDR; edema
    risk 0 -> NRDME, {1,2} -> RDME. This is a structural approximation of
    the referable thresholds, not a published equivalence.
    """
    if not 0 <= retinopathy_grade <= MESSIDOR_RETINOPATHY_MAX:
        raise RangeError(f"retinopathy grade {retinopathy_grade} out of range "
                         f"[0, {MESSIDOR_RETINOPATHY_MAX}]")
    if not 0 <= edema_risk <= MESSIDOR_EDEMA_MAX:
        raise RangeError(f"edema risk {edema_risk} out of range [0, {MESSIDOR_EDEMA_MAX}]")
    rdr = ClassLabel(GradingSystem.RDR, int(retinopathy_grade >= 2))
    rdme = ClassLabel(GradingSystem.RDME, int(edema_risk >= 1))
    return rdr, rdme


def parse_messidor(
    text: str,
) -> tuple[list[tuple[str, ClassLabel, ClassLabel]], list[Diagnostic]]:
    """Parse a Messidor label CSV into (image_id, rdr, rdme) triples."""
    reader = csv.reader(io.StringIO(text))
    try:
        header = tuple(h.strip() for h in next(reader))
    except StopIteration:
        raise FatalFormat("messidor label file is empty") from None
    if header != MESSIDOR_COLUMNS:
        raise FatalFormat(f"invalid messidor header {','.join(header)!r}; "
                          f"expected {','.join(MESSIDOR_COLUMNS)}")
    out: list[tuple[str, ClassLabel, ClassLabel]] = []
    diagnostics: list[Diagnostic] = []
    for line, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != 3:
            diagnostics.append(Diagnostic(line, f"expected 3 cells, got {len(row)}"))
            continue
        try:
            retinopathy = int(row[1])
            edema = int(row[2])
        except ValueError:
            diagnostics.append(Diagnostic(line, "grades must be integers"))
            continue
        try:
            rdr, rdme = map_messidor(retinopathy, edema)
        except RangeError as exc:
            diagnostics.append(Diagnostic(line, str(exc)))
            continue
        out.append((row[0].strip(), rdr, rdme))
    return out, diagnostics
