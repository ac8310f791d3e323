"""Fundus image normalization: locate the circular fundus region, crop its
tight bounding square and resize to the standard evaluation sizes.

Foreground is everything brighter than a small luminance threshold; the
largest 4-connected foreground component is taken as the fundus, which also
discards bright annotation marks in the frame border. When the tight square
would not fit inside the frame (disk touching the edges) the out-of-frame
area is filled with black so the output stays square without distortion.

Resampling is separable bicubic with the Catmull-Rom kernel (a = -0.5),
channel-wise, clamped to [0, 255]. The concrete kernel is pinned so output
bytes are reproducible across runs and worker counts.
"""

from __future__ import annotations

import io
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from PIL import Image
from scipy import ndimage

from .errors import InvalidBox, InvariantError, NoFundusDetected
from .grading import GradeRecord

log = logging.getLogger(__name__)

PRESET_SIZES = (256, 299, 512, 1024, 2095)
MIN_SIDE = 16

LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])
FOREGROUND_THRESHOLD = 10.0
MIN_FOREGROUND_FRACTION = 0.01

IMAGE_EXTENSIONS = (".png", ".jpg", ".jpeg")


@dataclass(frozen=True)
class CropBox:
    """Square crop region. x/y may reach past the frame only when the square
    cannot fit; the overhang is padded with black at extraction time."""

    x: int
    y: int
    side: int

    def __post_init__(self):
        if self.side < MIN_SIDE:
            raise InvariantError(f"crop side must be >= {MIN_SIDE}, got {self.side}")


def validate_image(img: np.ndarray) -> np.ndarray:
    img = np.asarray(img)
    if img.ndim != 3 or img.shape[2] != 3 or img.dtype != np.uint8:
        raise InvariantError("image must be an (h, w, 3) uint8 array")
    if img.shape[0] < MIN_SIDE or img.shape[1] < MIN_SIDE:
        raise InvariantError(f"image sides must be >= {MIN_SIDE} px")
    return img


def detect_fundus_square(img: np.ndarray) -> CropBox:
    """Tight bounding square of the largest connected foreground component."""
    img = validate_image(img)
    h, w = img.shape[:2]
    luma = img.astype(np.float64) @ LUMA_WEIGHTS
    mask = luma > FOREGROUND_THRESHOLD
    if mask.sum() < MIN_FOREGROUND_FRACTION * h * w:
        raise NoFundusDetected(
            f"foreground covers {mask.sum() / (h * w):.4%} of pixels (< "
            f"{MIN_FOREGROUND_FRACTION:.0%})")
    labels, n_components = ndimage.label(mask)
    largest = int(np.argmax(np.bincount(labels.ravel())[1:])) + 1
    component = labels == largest

    rows = np.nonzero(component.any(axis=1))[0]
    cols = np.nonzero(component.any(axis=0))[0]
    y0, y1 = int(rows[0]), int(rows[-1])
    x0, x1 = int(cols[0]), int(cols[-1])
    side = max(y1 - y0 + 1, x1 - x0 + 1)
    cx = (x0 + x1 + 1) / 2.0
    cy = (y0 + y1 + 1) / 2.0
    x = int(round(cx - side / 2.0))
    y = int(round(cy - side / 2.0))
    # keep the square inside the frame when it fits; center overhang otherwise
    x = min(max(x, min(0, w - side)), max(0, w - side))
    y = min(max(y, min(0, h - side)), max(0, h - side))
    return CropBox(x=x, y=y, side=side)


def extract_square(img: np.ndarray, box: CropBox) -> np.ndarray:
    """Cut the box out of the image, black-padding any overhang."""
    img = validate_image(img)
    h, w = img.shape[:2]
    if box.x >= w or box.y >= h or box.x + box.side <= 0 or box.y + box.side <= 0:
        raise InvalidBox(f"box {box} does not overlap a {w}x{h} image")
    out = np.zeros((box.side, box.side, 3), dtype=np.uint8)
    src_x0, src_y0 = max(box.x, 0), max(box.y, 0)
    src_x1, src_y1 = min(box.x + box.side, w), min(box.y + box.side, h)
    dst_x0, dst_y0 = src_x0 - box.x, src_y0 - box.y
    out[dst_y0:dst_y0 + (src_y1 - src_y0), dst_x0:dst_x0 + (src_x1 - src_x0)] = \
        img[src_y0:src_y1, src_x0:src_x1]
    return out


def _catmull_rom(distance: np.ndarray) -> np.ndarray:
    d = np.abs(distance)
    near = ((1.5 * d - 2.5) * d) * d + 1.0
    far = ((-0.5 * d + 2.5) * d - 4.0) * d + 2.0
    return np.where(d <= 1.0, near, np.where(d < 2.0, far, 0.0))


def _resample_taps(n_out: int, n_in: int) -> tuple[np.ndarray, np.ndarray]:
    """4-tap source indices and Catmull-Rom weights per output coordinate."""
    scale = n_in / n_out
    centers = (np.arange(n_out) + 0.5) * scale - 0.5
    base = np.floor(centers).astype(np.int64)
    offsets = np.arange(-1, 3)
    taps = base[:, None] + offsets[None, :]
    weights = _catmull_rom(centers[:, None] - taps)
    taps = np.clip(taps, 0, n_in - 1)
    return taps, weights


def _resample_rows(data: np.ndarray, taps: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Apply 4-tap row resampling to (h, w, c) data, one channel at a time."""
    out = np.empty((taps.shape[0], data.shape[1], data.shape[2]), dtype=np.float64)
    for c in range(data.shape[2]):
        plane = data[..., c]
        out[..., c] = np.einsum("ok,okm->om", weights, plane[taps], optimize=True)
    return out


def resize_bicubic(img: np.ndarray, side: int) -> np.ndarray:
    """Resize an (h, w, 3) uint8 image to side x side, Catmull-Rom bicubic."""
    if side < MIN_SIDE:
        raise InvariantError(f"target side must be >= {MIN_SIDE}, got {side}")
    img = validate_image(img)
    data = img.astype(np.float64)

    taps, weights = _resample_taps(side, img.shape[0])
    data = _resample_rows(data, taps, weights)
    taps, weights = _resample_taps(side, img.shape[1])
    data = _resample_rows(data.transpose(1, 0, 2), taps, weights).transpose(1, 0, 2)

    return np.clip(np.rint(data), 0.0, 255.0).astype(np.uint8)


def crop_resize(img: np.ndarray, box: CropBox, side: int) -> np.ndarray:
    """Extract the crop square and resize it to side x side."""
    return resize_bicubic(extract_square(img, box), side)


# ---------------------------------------------------------------------------
# Batch driver
# ---------------------------------------------------------------------------


@dataclass
class PreprocessReport:
    processed: list[str] = field(default_factory=list)
    failed: list[dict] = field(default_factory=list)
    per_size_counts: dict = field(default_factory=dict)
    written: int = 0
    rewritten: int = 0
    skipped_identical: int = 0

    def to_json(self) -> str:
        payload = {
            "processed": self.processed,
            "failed": self.failed,
            "per_size_counts": {str(k): v for k, v in self.per_size_counts.items()},
            "written": self.written,
            "rewritten": self.rewritten,
            "skipped_identical": self.skipped_identical,
        }
        return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def find_image_file(images_dir: Path, image_id: str) -> Path | None:
    for ext in IMAGE_EXTENSIONS:
        candidate = images_dir / f"{image_id}{ext}"
        if candidate.is_file():
            return candidate
    return None


def load_image(path: Path) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"))


def encode_png(img: np.ndarray) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(img).save(buf, format="PNG")
    return buf.getvalue()


def _process_one(image_id: str, images_dir: Path, sizes: Sequence[int], out_dir: Path):
    """Returns (image_id, error_or_None, [(size, path, png_bytes), ...])."""
    source = find_image_file(images_dir, image_id)
    if source is None:
        return image_id, f"no image file for {image_id!r} under {images_dir}", []
    try:
        img = load_image(source)
        box = detect_fundus_square(img)
        square = extract_square(img, box)
        outputs = []
        for size in sizes:
            png = encode_png(resize_bicubic(square, size))
            outputs.append((size, out_dir / str(size) / f"{image_id}.png", png))
        return image_id, None, outputs
    except (NoFundusDetected, InvalidBox, InvariantError, OSError) as exc:
        return image_id, f"{type(exc).__name__}: {exc}", []


def run_preprocess(
    records: Iterable[GradeRecord],
    images_dir: Path | str,
    sizes: Sequence[int],
    out_dir: Path | str,
    jobs: int = 1,
) -> PreprocessReport:
    """Crop and resize every manifest image into out_dir/<side>/<image_id>.png.

    Per-file problems are collected in the report, never aborting the batch.
    Re-running writes nothing when the bytes are unchanged, so the whole tree
    is idempotent and independent of the worker count.
    """
    images_dir = Path(images_dir)
    out_dir = Path(out_dir)
    sizes = sorted(set(int(s) for s in sizes))
    if not sizes:
        raise InvariantError("at least one target size required")
    for size in sizes:
        if size < MIN_SIDE:
            raise InvariantError(f"target side must be >= {MIN_SIDE}, got {size}")
        (out_dir / str(size)).mkdir(parents=True, exist_ok=True)

    image_ids = sorted({rec.image_id for rec in records})
    report = PreprocessReport(per_size_counts={s: 0 for s in sizes})

    def work(image_id):
        return _process_one(image_id, images_dir, sizes, out_dir)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(work, image_ids))
    else:
        results = [work(i) for i in image_ids]

    for image_id, error, outputs in results:
        if error is not None:
            log.warning("preprocess failed for %s: %s", image_id, error)
            report.failed.append({"image_id": image_id, "error": error})
            continue
        report.processed.append(image_id)
        for size, path, png in outputs:
            report.per_size_counts[size] += 1
            if path.exists():
                if path.read_bytes() == png:
                    report.skipped_identical += 1
                    continue
                report.rewritten += 1
            else:
                report.written += 1
            path.write_bytes(png)
    return report
