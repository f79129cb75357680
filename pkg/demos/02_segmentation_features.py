"""From interchange records to the transformed regressors.

Builds a couple of records in memory, serializes them through the
line-delimited interchange format, loads them back, and extracts
num_seg / num_class with their square-root transforms.
"""

import tempfile
from pathlib import Path

import numpy as np

from segcomplexity import build_feature_vector, read_dataset, write_dataset
from segcomplexity.maskio import ClassInstance, DatasetHeader, SegmentationRecord, encode_rle

rng = np.random.default_rng(1)


def record(image_id, n_segments, labels):
    segments = tuple(encode_rle(rng.random((32, 32)) < 0.5) for _ in range(n_segments))
    instances = tuple(ClassInstance(label=lbl, score=float(rng.uniform(0.5, 1.0)))
                      for lbl in labels)
    return SegmentationRecord(image_id=image_id, image_width=32, image_height=32,
                              segments=segments, class_instances=instances)


records = [
    record("busy_street", 140, ["car", "car", "person", "tree", "building", "sign"]),
    record("lone_square", 3, ["square"]),
    record("blank_wall", 1, []),  # zero detected classes is a legal record
]

with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "records.jsonl"
    write_dataset(path, records, DatasetHeader(producer="demo", created="2026-01-01T00:00:00Z"))
    print(f"wrote {path.stat().st_size} bytes, now reading back...")
    header, loaded = read_dataset(path)
    print(f"producer={header.producer!r}, {len(loaded)} records\n")

print(f"{'image':<14} {'num_seg':>7} {'num_class':>9} {'sqrt_seg':>9} {'sqrt_class':>10}")
for rec in loaded:
    fv = build_feature_vector(rec)
    print(f"{fv.image_id:<14} {fv.num_seg:>7} {fv.num_class:>9} "
          f"{fv.sqrt_num_seg:>9.3f} {fv.sqrt_num_class:>10.3f}")

print("\nRepeated labels count once per instance; sqrt(0) = 0 needs no special case.")
