"""End-to-end CLI run on a generated fixture: validate -> extract -> fit ->
eval -> report, all inside a temporary directory.

The same flow works on real data: point the manifest image paths at your
image files and the records at the interchange output of the inference
adapter.
"""

import json
import math
import tempfile
from pathlib import Path

import numpy as np

from segcomplexity.cli import main
from segcomplexity.maskio import ClassInstance, DatasetHeader, SegmentationRecord, encode_rle, write_dataset

rng = np.random.default_rng(11)

with tempfile.TemporaryDirectory() as tmp:
    root = Path(tmp)
    images_dir = root / "images"
    images_dir.mkdir()

    records = []
    manifest = ["image_id,image_path,category,raw_rating,rater_count"]
    for i in range(36):
        image_id = f"img{i:03d}"
        num_seg = int(rng.integers(1, 50))
        num_class = int(rng.integers(0, 8))
        segments = tuple(encode_rle(rng.random((8, 8)) < 0.5) for _ in range(num_seg))
        instances = tuple(ClassInstance(label="thing") for _ in range(num_class))
        records.append(SegmentationRecord(image_id=image_id, image_width=8, image_height=8,
                                          segments=segments, class_instances=instances))
        rating = 20.0 + 5.0 * math.sqrt(num_seg) + 3.0 * math.sqrt(num_class)
        manifest.append(f"{image_id},images/{image_id}.npy,scenes,{rating!r},15")
        np.save(images_dir / f"{image_id}.npy", rng.random((40, 48)))

    write_dataset(root / "records.jsonl", records,
                  DatasetHeader(producer="demo-adapter", created="2026-01-01T00:00:00Z"))
    (root / "manifest.csv").write_text("\n".join(manifest) + "\n")

    config = {
        "seed": 2026,
        "output_dir": "out",
        "records": ["records.jsonl"],
        "manifests": [{"name": "demo", "path": "manifest.csv"}],
        "groupings": ["demo-all"],
        "custom_groupings": [{"name": "demo-all", "select": {"demo": "*"}}],
        "model_specs": [["sqrt_num_seg"], ["sqrt_num_class"],
                        ["sqrt_num_seg", "sqrt_num_class"]],
        "k": 3,
        "repeats": "auto",
        "bins_per_axis": 3,
        "symmetry_enabled": True,
        "symmetry_scales": [8, 16],
        "resize_target": 32,
    }
    config_path = root / "config.json"
    config_path.write_text(json.dumps(config, indent=2))

    for cmd in ("validate", "extract", "fit", "eval", "report"):
        print(f"\n$ segcomplexity {cmd} --config config.json")
        code = main([cmd, "--config", str(config_path)])
        assert code == 0, f"{cmd} exited {code}"

    print("\noutput tree:")
    for p in sorted((root / "out").rglob("*")):
        if p.is_file():
            print(f"  {p.relative_to(root)}")

    matrix = (root / "out" / "report" / "spearman_matrix.csv").read_text()
    print("\nreport/spearman_matrix.csv:")
    print(matrix)
