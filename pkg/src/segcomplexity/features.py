"""Image-level regressors: segment count, class-instance count, patch symmetry.

The two counts are exact list lengths from a segmentation record (no
deduplication, no area filtering beyond what the producer applied). Both are
square-root transformed before regression, which keeps their ordering intact.

Patch symmetry measures spatial regularity: the image is tiled into
non-overlapping square patches at several scales, each patch p scores
``1 - (mean|p - mirror_h(p)| + mean|p - mirror_v(p)|) / 2``, and the final
score averages over patches and then over scales. Intensities live in [0, 1],
so the score does too: 1.0 means every patch is perfectly reflection
symmetric. Partial patches at the right/bottom edge are discarded. For
cross-dataset comparability the extraction pipeline first converts to
grayscale (Rec.601 luma) and resizes so the shorter side hits a fixed target.

All functions here are pure and safe to fan out across worker threads.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .maskio import SegmentationRecord

DEFAULT_SYMMETRY_SCALES = (16, 32, 64)
DEFAULT_RESIZE_TARGET = 256

FEATURE_CSV_COLUMNS = ("image_id", "num_seg", "num_class",
                       "sqrt_num_seg", "sqrt_num_class", "patch_symm")

# A grayscale image is a 2-D float array with intensities in [0, 1].
GrayImage = np.ndarray


class SymmetryConfigError(ValueError):
    """Bad patch-symmetry configuration (empty or out-of-range scales)."""


class MissingImageError(ValueError):
    """Symmetry extraction was requested but no image was provided."""


@dataclass(frozen=True)
class FeatureConfig:
    """What to extract: symmetry on/off, its scales, and the resize target."""

    with_symmetry: bool = False
    symmetry_scales: tuple[int, ...] = DEFAULT_SYMMETRY_SCALES
    resize_target: int | None = DEFAULT_RESIZE_TARGET


@dataclass(frozen=True)
class FeatureVector:
    """Transformed regressors for one image."""

    image_id: str
    num_seg: int
    num_class: int
    sqrt_num_seg: float
    sqrt_num_class: float
    patch_symm: float | None = None

    def regressors(self) -> dict[str, float]:
        out = {"sqrt_num_seg": self.sqrt_num_seg, "sqrt_num_class": self.sqrt_num_class}
        if self.patch_symm is not None:
            out["patch_symm"] = self.patch_symm
        return out


def count_segments(record: SegmentationRecord) -> int:
    """Total number of class-agnostic segment masks in the record."""
    return len(record.segments)


def count_class_instances(record: SegmentationRecord) -> int:
    """Total number of named class instances; repeated labels count per instance."""
    return len(record.class_instances)


def _check_gray(image: np.ndarray) -> np.ndarray:
    img = np.asarray(image, dtype=float)
    if img.ndim != 2 or img.shape[0] < 1 or img.shape[1] < 1:
        raise ValueError(f"expected a 2-D grayscale image, got shape {img.shape}")
    if not np.all(np.isfinite(img)):
        raise ValueError("image contains non-finite intensities")
    if img.min() < 0.0 or img.max() > 1.0:
        raise ValueError("intensities must lie in [0, 1]")
    return img


def rgb_to_gray(rgb: np.ndarray) -> GrayImage:
    """Rec.601 luma (0.299 R + 0.587 G + 0.114 B), scaled to [0, 1]."""
    arr = np.asarray(rgb)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValueError(f"expected an (H, W, 3) array, got shape {arr.shape}")
    arr = arr.astype(float)
    if arr.max() > 1.0:  # 8-bit input
        arr = arr / 255.0
    gray = arr[..., 0] * 0.299 + arr[..., 1] * 0.587 + arr[..., 2] * 0.114
    return np.clip(gray, 0.0, 1.0)


def resize_bilinear(image: GrayImage, out_height: int, out_width: int) -> GrayImage:
    """Bilinear resize with half-pixel-centered sampling."""
    img = np.asarray(image, dtype=float)
    h, w = img.shape
    if out_height < 1 or out_width < 1:
        raise ValueError("output dimensions must be >= 1")
    r = (np.arange(out_height) + 0.5) * (h / out_height) - 0.5
    c = (np.arange(out_width) + 0.5) * (w / out_width) - 0.5
    rf = np.floor(r)
    cf = np.floor(c)
    fr = (r - rf)[:, None]
    fc = (c - cf)[None, :]
    r0 = np.clip(rf.astype(int), 0, h - 1)
    r1 = np.clip(rf.astype(int) + 1, 0, h - 1)
    c0 = np.clip(cf.astype(int), 0, w - 1)
    c1 = np.clip(cf.astype(int) + 1, 0, w - 1)
    top = img[np.ix_(r0, c0)] * (1 - fc) + img[np.ix_(r0, c1)] * fc
    bottom = img[np.ix_(r1, c0)] * (1 - fc) + img[np.ix_(r1, c1)] * fc
    return top * (1 - fr) + bottom * fr


def resize_shorter_side(image: GrayImage, target: int) -> GrayImage:
    """Resize so the shorter side equals ``target``, preserving aspect ratio."""
    img = np.asarray(image, dtype=float)
    h, w = img.shape
    if min(h, w) == target:
        return img
    if h <= w:
        out_h = target
        out_w = max(1, int(math.floor(w * target / h + 0.5)))
    else:
        out_w = target
        out_h = max(1, int(math.floor(h * target / w + 0.5)))
    return resize_bilinear(img, out_h, out_w)


def patch_symmetry(image: GrayImage, scales: Sequence[int]) -> float:
    """Mean reflection symmetry of non-overlapping patches across scales.

    Deterministic, bounded to [0, 1], and invariant under mirroring of the
    whole image (exactly so when the dimensions are divisible by each scale)
    and under global intensity inversion.
    """
    img = _check_gray(image)
    h, w = img.shape
    scales = tuple(int(s) for s in scales)
    if not scales:
        raise SymmetryConfigError("at least one patch scale is required")
    for s in scales:
        if s < 2:
            raise SymmetryConfigError(f"patch scale must be >= 2, got {s}")
        if s > min(h, w):
            raise SymmetryConfigError(
                f"patch scale {s} exceeds the image's shorter side {min(h, w)}")
    per_scale = []
    for s in scales:
        nh, nw = h // s, w // s
        tiles = img[:nh * s, :nw * s].reshape(nh, s, nw, s).transpose(0, 2, 1, 3)
        dh = np.abs(tiles - tiles[:, :, :, ::-1]).mean(axis=(2, 3))
        dv = np.abs(tiles - tiles[:, :, ::-1, :]).mean(axis=(2, 3))
        per_scale.append(float(np.mean(1.0 - (dh + dv) / 2.0)))
    return float(np.mean(per_scale))


def build_feature_vector(record: SegmentationRecord,
                         image: GrayImage | None = None,
                         config: FeatureConfig = FeatureConfig()) -> FeatureVector:
    """Counts plus square-root transforms, with optional patch symmetry."""
    num_seg = count_segments(record)
    num_class = count_class_instances(record)
    symm = None
    if config.with_symmetry:
        if image is None:
            raise MissingImageError(
                f"record {record.image_id!r}: patch symmetry requested but no image given")
        img = _check_gray(image)
        if config.resize_target is not None:
            img = resize_shorter_side(img, config.resize_target)
        symm = patch_symmetry(img, config.symmetry_scales)
    return FeatureVector(
        image_id=record.image_id,
        num_seg=num_seg,
        num_class=num_class,
        sqrt_num_seg=math.sqrt(num_seg),
        sqrt_num_class=math.sqrt(num_class),
        patch_symm=symm,
    )


def load_gray_image(path: str | Path) -> GrayImage:
    """Load an image file as grayscale in [0, 1].

    ``.npy`` arrays (2-D grayscale or HxWx3 RGB; uint8 or float) are read
    natively; everything else goes through Pillow.
    """
    path = Path(path)
    if path.suffix.lower() == ".npy":
        arr = np.load(path)
        if arr.ndim == 3:
            return rgb_to_gray(arr)
        arr = arr.astype(float)
        if arr.max() > 1.0:
            arr = arr / 255.0
        return _check_gray(arr)
    from PIL import Image  # deferred: only needed for real image files

    with Image.open(path) as im:
        if im.mode in ("L", "I;16", "I"):
            arr = np.asarray(im.convert("L"), dtype=float) / 255.0
            return _check_gray(arr)
        return rgb_to_gray(np.asarray(im.convert("RGB")))


# --- feature table I/O -------------------------------------------------------

def write_features_csv(path: str | Path, vectors: Iterable[FeatureVector],
                       config_hash: str | None = None) -> None:
    """One row per image; patch_symm column is empty when disabled."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        if config_hash is not None:
            fh.write(f"# config_hash={config_hash}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(FEATURE_CSV_COLUMNS)
        for v in vectors:
            writer.writerow([
                v.image_id, v.num_seg, v.num_class,
                repr(v.sqrt_num_seg), repr(v.sqrt_num_class),
                "" if v.patch_symm is None else repr(v.patch_symm),
            ])


def read_features_csv(path: str | Path) -> tuple[str | None, dict[str, FeatureVector]]:
    """Read a feature table back as {image_id: FeatureVector} plus its config hash."""
    config_hash = None
    with open(path, "r", encoding="utf-8", newline="") as fh:
        first = fh.readline()
        if first.startswith("# config_hash="):
            config_hash = first.strip().split("=", 1)[1]
        else:
            fh.seek(0)
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or tuple(reader.fieldnames) != FEATURE_CSV_COLUMNS:
            raise ValueError(f"{path}: unexpected feature CSV header {reader.fieldnames}")
        out: dict[str, FeatureVector] = {}
        for row in reader:
            vec = FeatureVector(
                image_id=row["image_id"],
                num_seg=int(row["num_seg"]),
                num_class=int(row["num_class"]),
                sqrt_num_seg=float(row["sqrt_num_seg"]),
                sqrt_num_class=float(row["sqrt_num_class"]),
                patch_symm=float(row["patch_symm"]) if row["patch_symm"] else None,
            )
            out[vec.image_id] = vec
    return config_hash, out
