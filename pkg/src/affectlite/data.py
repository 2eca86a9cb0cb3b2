"""Dataset ingestion and image preprocessing.

Manifests are flat CSV files (``path,bbox_x,bbox_y,bbox_w,bbox_h,emotion,
valence,arousal``) in the style of in-the-wild affect datasets: emotion ids
0-7 are the usable categories, 8-10 mark unusable annotations, and a
valence or arousal of -2 marks a missing continuous label. Loading filters
rows by task; preprocessing crops to the face box, resizes to 128x128 with
bilinear interpolation and scales pixel values to [0, 1].
"""

from __future__ import annotations

import csv
import io
import logging
import math
import os
from dataclasses import dataclass, field

import numpy as np
from PIL import Image, UnidentifiedImageError

from .tensor import Tensor, as_array

logger = logging.getLogger(__name__)

EMOTIONS = (
    "neutral",
    "happy",
    "sad",
    "surprised",
    "afraid",
    "disgusted",
    "angry",
    "contemptuous",
)
EMOTION_IDS = {name: i for i, name in enumerate(EMOTIONS)}

# Raw annotation values outside the usable ranges.
INVALID_EMOTION_IDS = (8, 9, 10)  # none, uncertain, no-face
MISSING_VA = -2.0

IMAGE_SIZE = 128

TASK_CLASSIFICATION = "classification"
TASK_REGRESSION = "regression"
TASKS = (TASK_CLASSIFICATION, TASK_REGRESSION)

MANIFEST_COLUMNS = ("path", "bbox_x", "bbox_y", "bbox_w", "bbox_h", "emotion", "valence", "arousal")


class DataError(ValueError):
    pass


class ManifestError(DataError):
    pass


@dataclass(frozen=True)
class Sample:
    image_path: str
    bbox: tuple | None  # (x, y, w, h) in pixels
    emotion: int
    valence: float
    arousal: float


@dataclass
class DatasetManifest:
    task: str
    samples: list = field(default_factory=list)
    dropped: int = 0

    def __len__(self):
        return len(self.samples)


def _parse_row(row: dict, line: int) -> Sample:
    def fail(msg):
        raise ManifestError(f"manifest line {line}: {msg}")

    try:
        emotion = int(row["emotion"])
    except (ValueError, TypeError):
        fail(f"emotion {row.get('emotion')!r} is not an integer")
    if not 0 <= emotion <= 10:
        fail(f"emotion id {emotion} outside 0..10")

    va = []
    for key in ("valence", "arousal"):
        try:
            value = float(row[key])
        except (ValueError, TypeError):
            fail(f"{key} {row.get(key)!r} is not a number")
        if not (-1.0 <= value <= 1.0 or value == MISSING_VA):
            fail(f"{key} {value} outside [-1, 1] and not the missing marker -2")
        va.append(value)

    bbox_cells = [row.get(k, "") or "" for k in ("bbox_x", "bbox_y", "bbox_w", "bbox_h")]
    stripped = [c.strip() for c in bbox_cells]
    if all(not c for c in stripped):
        bbox = None
    elif all(stripped):
        try:
            bbox = tuple(float(c) for c in stripped)
        except ValueError:
            fail(f"bbox cells {bbox_cells} are not numbers")
        if bbox[2] <= 0 or bbox[3] <= 0:
            fail(f"bbox {bbox} has non-positive extent")
    else:
        fail("bbox must have all four cells or none")

    path = (row.get("path") or "").strip()
    if not path:
        fail("empty image path")
    return Sample(image_path=path, bbox=bbox, emotion=emotion, valence=va[0], arousal=va[1])


def _keep(sample: Sample, task: str) -> bool:
    if task == TASK_CLASSIFICATION:
        return sample.emotion not in INVALID_EMOTION_IDS
    return sample.valence != MISSING_VA and sample.arousal != MISSING_VA


def load_manifest(path, task: str) -> DatasetManifest:
    """Read a CSV manifest and drop rows that are invalid for ``task``."""
    if task not in TASKS:
        raise ManifestError(f"unknown task {task!r}; expected one of {TASKS}")
    manifest = DatasetManifest(task=task)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            logger.warning("manifest %s is empty", path)
            return manifest
        missing = set(MANIFEST_COLUMNS) - set(reader.fieldnames)
        if missing:
            raise ManifestError(f"manifest {path} lacks columns: {sorted(missing)}")
        for line, row in enumerate(reader, start=2):
            sample = _parse_row(row, line)
            if _keep(sample, task):
                manifest.samples.append(sample)
            else:
                manifest.dropped += 1
    if not manifest.samples:
        logger.warning("manifest %s yielded no usable samples for task %s", path, task)
    if manifest.dropped:
        logger.info(
            "manifest %s: kept %d samples, dropped %d invalid for %s",
            path,
            len(manifest.samples),
            manifest.dropped,
            task,
        )
    return manifest


def decode_image_bytes(blob: bytes) -> np.ndarray:
    """Decode PNG/JPEG bytes to an RGB uint8 array."""
    try:
        with Image.open(io.BytesIO(blob)) as img:
            return np.asarray(img.convert("RGB"), dtype=np.uint8)
    except (UnidentifiedImageError, OSError, ValueError) as exc:
        raise DataError(f"cannot decode image: {exc}") from None


def load_image(path) -> np.ndarray:
    try:
        with Image.open(path) as img:
            return np.asarray(img.convert("RGB"), dtype=np.uint8)
    except (UnidentifiedImageError, OSError, ValueError) as exc:
        raise DataError(f"cannot read image {path}: {exc}") from None


def bilinear_sample(img: np.ndarray, ys: np.ndarray, xs: np.ndarray) -> np.ndarray:
    """Sample an image at fractional coordinates, replicating edge pixels."""
    h, w = img.shape[:2]
    ys = np.clip(ys, 0.0, h - 1.0)
    xs = np.clip(xs, 0.0, w - 1.0)
    y0 = np.floor(ys).astype(np.intp)
    x0 = np.floor(xs).astype(np.intp)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    wy = (ys - y0).astype(img.dtype if img.dtype.kind == "f" else np.float32)
    wx = (xs - x0).astype(wy.dtype)
    if img.ndim == 3:
        wy = wy[..., None]
        wx = wx[..., None]
    top = img[y0, x0] * (1 - wx) + img[y0, x1] * wx
    bottom = img[y1, x0] * (1 - wx) + img[y1, x1] * wx
    return top * (1 - wy) + bottom * wy


def bilinear_resize(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Half-pixel-centre bilinear resize; the identity when sizes match."""
    h, w = img.shape[:2]
    src = img.astype(np.float32) if img.dtype.kind != "f" else img
    ys = (np.arange(out_h, dtype=np.float64) + 0.5) * (h / out_h) - 0.5
    xs = (np.arange(out_w, dtype=np.float64) + 0.5) * (w / out_w) - 0.5
    grid_y, grid_x = np.meshgrid(ys, xs, indexing="ij")
    return bilinear_sample(src, grid_y, grid_x)


def apply_affine(img: np.ndarray, angle_deg: float, tx: float, ty: float, flip: bool) -> np.ndarray:
    """Flip, rotate about the centre, then translate, sampling bilinearly.

    Coordinates that fall outside the source are filled by edge replication.
    """
    h, w = img.shape[:2]
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    rows, cols = np.meshgrid(
        np.arange(h, dtype=np.float64), np.arange(w, dtype=np.float64), indexing="ij"
    )
    x = cols - cx - tx
    y = rows - cy - ty
    rad = math.radians(angle_deg)
    c, s = math.cos(rad), math.sin(rad)
    xs = c * x + s * y + cx
    ys = -s * x + c * y + cy
    if flip:
        xs = (w - 1.0) - xs
    src = img.astype(np.float32) if img.dtype.kind != "f" else img
    return bilinear_sample(src, ys, xs)


def _crop(arr: np.ndarray, bbox) -> np.ndarray:
    h, w = arr.shape[:2]
    if bbox is None:
        side = min(h, w)
        y0 = (h - side) // 2
        x0 = (w - side) // 2
        return arr[y0 : y0 + side, x0 : x0 + side]
    x, y, bw, bh = bbox
    if bw <= 0 or bh <= 0:
        raise DataError(f"bbox {bbox} has non-positive extent")
    x0 = max(0, int(math.floor(x)))
    y0 = max(0, int(math.floor(y)))
    x1 = min(w, int(math.ceil(x + bw)))
    y1 = min(h, int(math.ceil(y + bh)))
    if x1 <= x0 or y1 <= y0:
        raise DataError(f"bbox {bbox} lies entirely outside the {w}x{h} image")
    return arr[y0:y1, x0:x1]


def preprocess(image, bbox=None) -> Tensor:
    """Crop, resize to 128x128 and scale 8-bit values to [0, 1].

    Without a bounding box the largest centred square is used.
    """
    arr = np.asarray(as_array(image))
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise DataError(f"expected an RGB image (H, W, 3), got shape {arr.shape}")
    cropped = _crop(arr, bbox)
    resized = bilinear_resize(cropped, IMAGE_SIZE, IMAGE_SIZE)
    return Tensor.wrap((resized / 255.0).astype(np.float32))


@dataclass
class DatasetStats:
    n: int
    class_counts: dict
    valence_mean: float | None
    arousal_mean: float | None


def dataset_stats(manifest: DatasetManifest) -> DatasetStats:
    """Per-class counts and means of the valid continuous annotations."""
    counts = {name: 0 for name in EMOTIONS}
    for s in manifest.samples:
        if 0 <= s.emotion < len(EMOTIONS):
            counts[EMOTIONS[s.emotion]] += 1
    valences = [s.valence for s in manifest.samples if s.valence != MISSING_VA]
    arousals = [s.arousal for s in manifest.samples if s.arousal != MISSING_VA]
    return DatasetStats(
        n=len(manifest.samples),
        class_counts=counts,
        valence_mean=float(np.mean(valences)) if valences else None,
        arousal_mean=float(np.mean(arousals)) if arousals else None,
    )


def load_arrays(manifest: DatasetManifest, root=None):
    """Decode and preprocess every sample; returns (images, targets).

    Targets are integer emotion ids for classification manifests and
    (valence, arousal) float pairs for regression manifests.
    """
    images = []
    for s in manifest.samples:
        path = s.image_path if root is None else os.path.join(root, s.image_path)
        images.append(preprocess(load_image(path), s.bbox).array)
    x = (
        np.stack(images)
        if images
        else np.zeros((0, IMAGE_SIZE, IMAGE_SIZE, 3), dtype=np.float32)
    )
    if manifest.task == TASK_CLASSIFICATION:
        y = np.array([s.emotion for s in manifest.samples], dtype=np.int64)
    else:
        y = np.array([(s.valence, s.arousal) for s in manifest.samples], dtype=np.float32)
        y = y.reshape(-1, 2)
    return x, y
