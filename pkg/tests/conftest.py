import math

import numpy as np
import pytest

from segcomplexity.dataset import ImageSet, ImageSetRow
from segcomplexity.features import FeatureVector
from segcomplexity.maskio import (
    ClassInstance,
    DatasetHeader,
    RunLengthMask,
    SegmentationRecord,
    encode_rle,
    write_dataset,
)


def random_mask(rng, max_dim=64):
    h = int(rng.integers(1, max_dim + 1))
    w = int(rng.integers(1, max_dim + 1))
    return rng.random((h, w)) < rng.random()


def make_record(image_id, n_segments, labels=(), width=8, height=8, rng=None,
                granularity=64):
    """Record with n random segment masks and one class instance per label."""
    rng = rng or np.random.default_rng(0)
    segments = tuple(
        encode_rle(rng.random((height, width)) < 0.5) for _ in range(n_segments)
    )
    instances = tuple(ClassInstance(label=label) for label in labels)
    return SegmentationRecord(
        image_id=image_id, image_width=width, image_height=height,
        segments=segments, class_instances=instances, granularity=granularity,
    )


def feature_vector(image_id, num_seg, num_class, patch_symm=None):
    return FeatureVector(
        image_id=image_id, num_seg=num_seg, num_class=num_class,
        sqrt_num_seg=math.sqrt(num_seg), sqrt_num_class=math.sqrt(num_class),
        patch_symm=patch_symm,
    )


def linear_image_set(n, seed=0, name="synthetic", noise=0.0,
                     intercept=20.0, w_seg=5.0, w_class=3.0):
    """Image-set whose ratings are an (optionally noisy) linear function of
    the transformed counts: rating = intercept + w_seg*sqrt(num_seg) +
    w_class*sqrt(num_class)."""
    rng = np.random.default_rng(seed)
    rows = []
    for i in range(n):
        num_seg = int(rng.integers(1, 600))
        num_class = int(rng.integers(0, 80))
        fv = feature_vector(f"img{i:04d}", num_seg, num_class)
        rating = intercept + w_seg * fv.sqrt_num_seg + w_class * fv.sqrt_num_class
        if noise:
            rating += noise * rng.standard_normal()
        rows.append(ImageSetRow(image_id=fv.image_id, features=fv, rating=float(rating)))
    return ImageSet(name=name, rows=tuple(rows))


def shuffled_image_set(n, seed=0, name="null"):
    """Ratings independent of the features (permutation null)."""
    base = linear_image_set(n, seed=seed, name=name)
    rng = np.random.default_rng(seed + 1)
    ratings = rng.permutation([row.rating for row in base.rows])
    rows = tuple(
        ImageSetRow(image_id=r.image_id, features=r.features, rating=float(v))
        for r, v in zip(base.rows, ratings)
    )
    return ImageSet(name=name, rows=rows)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def record_file(tmp_path):
    """Small on-disk dataset: 3 records, mixed segments and instances."""
    rng = np.random.default_rng(7)
    records = [
        make_record("a", 3, ("tree", "tree"), rng=rng),
        make_record("b", 0, (), rng=rng),
        make_record("c", 5, ("car",), rng=rng),
    ]
    path = tmp_path / "records.jsonl"
    write_dataset(path, records, DatasetHeader(producer="fixture", created="2026-01-01T00:00:00Z"))
    return path, records
