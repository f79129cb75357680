"""Image-set manifests, rating normalization, and category merging.

A manifest is a flat CSV (header: image_id,image_path,category,raw_rating,
rater_count) describing one source dataset; image pixels stay on disk and are
referenced by relative path. Evaluation operates on merged image-sets built
from named category groupings, with ratings min-max normalized to [0, 100]
per merged set — after merging, never before — so the pipeline order is
merge -> normalize -> join features.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .features import FeatureVector

logger = logging.getLogger(__name__)

MANIFEST_COLUMNS = ("image_id", "image_path", "category", "raw_rating", "rater_count")

# Categories dropped from wildcard selections: both contain substantial text.
EXCLUDED_BY_DEFAULT = frozenset({"advertisement", "visualisation"})


class ManifestError(ValueError):
    """Malformed manifest CSV or violated manifest invariant."""


class GroupingError(ValueError):
    """Grouping references unknown data or selects nothing."""


class ConstantRatingsError(ValueError):
    """Min-max normalization is undefined for a constant rating vector."""


class MissingFeaturesError(ValueError):
    def __init__(self, image_set: str, missing_ids: Sequence[str]):
        self.missing_ids = tuple(missing_ids)
        shown = ", ".join(self.missing_ids[:10])
        more = "" if len(self.missing_ids) <= 10 else f" (+{len(self.missing_ids) - 10} more)"
        super().__init__(
            f"image-set {image_set!r}: no features for {len(self.missing_ids)} "
            f"image ids: {shown}{more}")


@dataclass(frozen=True)
class ManifestRow:
    image_id: str
    image_path: str
    category: str
    raw_rating: float
    rater_count: int | None = None


@dataclass(frozen=True)
class DatasetManifest:
    name: str
    rows: tuple[ManifestRow, ...]

    @property
    def categories(self) -> set[str]:
        return {r.category for r in self.rows}


def read_manifest(path: str | Path, name: str | None = None) -> DatasetManifest:
    """Read and validate a manifest CSV; name defaults to the file stem."""
    path = Path(path)
    name = name or path.stem
    rows: list[ManifestRow] = []
    seen: set[str] = set()
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or tuple(reader.fieldnames) != MANIFEST_COLUMNS:
            raise ManifestError(
                f"{path}: manifest header must be {','.join(MANIFEST_COLUMNS)}, "
                f"got {reader.fieldnames}")
        for lineno, row in enumerate(reader, start=2):
            image_id = row["image_id"]
            if not image_id:
                raise ManifestError(f"{path}:{lineno}: empty image_id")
            if image_id in seen:
                raise ManifestError(f"{path}:{lineno}: duplicate image_id {image_id!r}")
            seen.add(image_id)
            try:
                rating = float(row["raw_rating"])
            except (TypeError, ValueError):
                raise ManifestError(
                    f"{path}:{lineno}: raw_rating {row['raw_rating']!r} is not a number")
            if not math.isfinite(rating):
                raise ManifestError(f"{path}:{lineno}: raw_rating must be finite")
            rater_count = row.get("rater_count") or None
            rows.append(ManifestRow(
                image_id=image_id,
                image_path=row["image_path"],
                category=row["category"],
                raw_rating=rating,
                rater_count=int(rater_count) if rater_count is not None else None,
            ))
    return DatasetManifest(name=name, rows=tuple(rows))


def write_manifest(path: str | Path, manifest: DatasetManifest) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(MANIFEST_COLUMNS)
        for r in manifest.rows:
            writer.writerow([r.image_id, r.image_path, r.category, repr(r.raw_rating),
                             "" if r.rater_count is None else r.rater_count])


def normalize_ratings(raw: Sequence[float] | np.ndarray,
                      method: str = "minmax") -> np.ndarray:
    """Map raw ratings onto [0, 100]; min-max is the only method."""
    if method != "minmax":
        raise ValueError(f"unknown normalization method {method!r}")
    arr = np.asarray(raw, dtype=float)
    if arr.size == 0:
        raise ValueError("cannot normalize an empty rating vector")
    lo = float(arr.min())
    hi = float(arr.max())
    if lo == hi:
        raise ConstantRatingsError(
            f"ratings are constant ({lo}); min-max normalization is undefined")
    return (arr - lo) * (100.0 / (hi - lo))


# --- grouping schemes ---------------------------------------------------------

@dataclass(frozen=True)
class GroupingScheme:
    """Which (dataset, category) pairs an image-set draws from.

    ``categories=None`` selects every category in that dataset except the
    default exclusions.
    """

    name: str
    select: tuple[tuple[str, tuple[str, ...] | None], ...]


def _scheme(name: str, select: Mapping[str, Sequence[str] | None]) -> GroupingScheme:
    return GroupingScheme(
        name=name,
        select=tuple((ds, None if cats is None else tuple(cats))
                     for ds, cats in select.items()),
    )


# The 8 built-in analysis image-sets drawn from the 4 source datasets.
BUILTIN_GROUPINGS: dict[str, GroupingScheme] = {
    scheme.name: scheme for scheme in (
        _scheme("RSIVL", {"rsivl": None}),
        _scheme("Sav. Scenes", {"savoias": ("scenes", "objects")}),
        _scheme("IC9. Scenes", {"ic9600": ("scenes", "objects", "person",
                                           "transportation", "architecture")}),
        _scheme("Sav. Art", {"savoias": ("art",)}),
        _scheme("Sav. Suprematism", {"savoias": ("suprematism",)}),
        _scheme("IC9. Paintings", {"ic9600": ("paintings",)}),
        _scheme("VISC", {"visc": None}),
        _scheme("Sav. Int", {"savoias": ("interior_design",)}),
    )
}


@dataclass(frozen=True)
class SkeletonRow:
    image_id: str
    image_path: str
    category: str
    rating: float


@dataclass(frozen=True)
class ImageSetSkeleton:
    """Merged rows before feature join; ratings raw until ``normalized``."""

    name: str
    rows: tuple[SkeletonRow, ...]
    normalized: bool = False


@dataclass(frozen=True)
class ImageSetRow:
    image_id: str
    features: FeatureVector
    rating: float


@dataclass(frozen=True)
class ImageSet:
    name: str
    rows: tuple[ImageSetRow, ...]

    def ids(self) -> list[str]:
        return [r.image_id for r in self.rows]

    def ratings(self) -> np.ndarray:
        return np.array([r.rating for r in self.rows], dtype=float)

    def feature_rows(self) -> list[FeatureVector]:
        return [r.features for r in self.rows]


def _resolve_scheme(grouping: GroupingScheme | str) -> GroupingScheme:
    if isinstance(grouping, GroupingScheme):
        return grouping
    if grouping in BUILTIN_GROUPINGS:
        return BUILTIN_GROUPINGS[grouping]
    raise GroupingError(
        f"unknown grouping {grouping!r}; built-ins: {sorted(BUILTIN_GROUPINGS)}")


def merge_categories(manifests: Sequence[DatasetManifest],
                     grouping: GroupingScheme | str | Sequence[GroupingScheme | str],
                     ) -> list[ImageSetSkeleton]:
    """Build image-set skeletons by selecting categories from the manifests.

    The output row multiset is exactly the union of the selected category
    rows — no duplication, no loss. Unknown datasets or categories in the
    grouping are errors, as is an empty result.
    """
    if isinstance(grouping, (GroupingScheme, str)):
        groupings: Sequence[GroupingScheme | str] = [grouping]
    else:
        groupings = grouping
    by_name = {m.name: m for m in manifests}
    skeletons = []
    for g in groupings:
        scheme = _resolve_scheme(g)
        rows: list[SkeletonRow] = []
        seen: set[str] = set()
        for ds_name, cats in scheme.select:
            manifest = by_name.get(ds_name)
            if manifest is None:
                raise GroupingError(
                    f"grouping {scheme.name!r} references dataset {ds_name!r}; "
                    f"available: {sorted(by_name)}")
            available = manifest.categories
            if cats is None:
                selected = available - EXCLUDED_BY_DEFAULT
            else:
                unknown = [c for c in cats if c not in available]
                if unknown:
                    raise GroupingError(
                        f"grouping {scheme.name!r}: categories {unknown} not in "
                        f"dataset {ds_name!r} (has {sorted(available)})")
                selected = set(cats)
            for r in manifest.rows:
                if r.category in selected:
                    if r.image_id in seen:
                        raise GroupingError(
                            f"grouping {scheme.name!r}: duplicate image_id "
                            f"{r.image_id!r} in merged set")
                    seen.add(r.image_id)
                    rows.append(SkeletonRow(image_id=r.image_id, image_path=r.image_path,
                                            category=r.category, rating=r.raw_rating))
        if not rows:
            raise GroupingError(f"grouping {scheme.name!r} selected no rows")
        skeletons.append(ImageSetSkeleton(name=scheme.name, rows=tuple(rows)))
    return skeletons


def normalize_skeleton(skeleton: ImageSetSkeleton,
                       method: str = "minmax") -> ImageSetSkeleton:
    """Normalize ratings to [0, 100] at the merged image-set level."""
    normalized = normalize_ratings([r.rating for r in skeleton.rows], method=method)
    rows = tuple(
        SkeletonRow(image_id=r.image_id, image_path=r.image_path,
                    category=r.category, rating=float(v))
        for r, v in zip(skeleton.rows, normalized)
    )
    return ImageSetSkeleton(name=skeleton.name, rows=rows, normalized=True)


def join_features(skeleton: ImageSetSkeleton,
                  features: Mapping[str, FeatureVector]) -> ImageSet:
    """Attach feature vectors by image_id; every skeleton id must be covered.

    Feature ids with no matching skeleton row are ignored (and logged).
    """
    missing = [r.image_id for r in skeleton.rows if r.image_id not in features]
    if missing:
        raise MissingFeaturesError(skeleton.name, missing)
    extras = set(features) - {r.image_id for r in skeleton.rows}
    if extras:
        logger.info("join_features(%s): ignoring %d feature rows without manifest rows",
                    skeleton.name, len(extras))
    rows = tuple(
        ImageSetRow(image_id=r.image_id, features=features[r.image_id], rating=r.rating)
        for r in skeleton.rows
    )
    return ImageSet(name=skeleton.name, rows=rows)


def build_image_sets(manifests: Sequence[DatasetManifest],
                     groupings: Sequence[GroupingScheme | str],
                     features: Mapping[str, FeatureVector],
                     method: str = "minmax") -> list[ImageSet]:
    """merge -> normalize -> join, in that order, for each grouping."""
    out = []
    for skeleton in merge_categories(manifests, groupings):
        out.append(join_features(normalize_skeleton(skeleton, method=method), features))
    return out
