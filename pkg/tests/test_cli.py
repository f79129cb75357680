import json
import math

import numpy as np
import pytest

from segcomplexity.cli import EXIT_INPUT, EXIT_OK, EXIT_RUNTIME, LOCK_FILENAME, main
from segcomplexity.maskio import DatasetHeader, write_dataset

from conftest import make_record


def build_fixture(root, n=30, seed=0, symmetry=False):
    """Synthetic pipeline inputs: records, manifest, config.

    Ratings are an exact linear function of the transformed counts, so the
    noiseless CV Spearman is 1.0.
    """
    rng = np.random.default_rng(seed)
    records = []
    manifest_lines = ["image_id,image_path,category,raw_rating,rater_count"]
    images_dir = root / "images"
    if symmetry:
        images_dir.mkdir(exist_ok=True)
    for i in range(n):
        image_id = f"img{i:03d}"
        num_seg = int(rng.integers(1, 40))
        num_class = int(rng.integers(0, 6))
        records.append(make_record(image_id, num_seg, ["thing"] * num_class,
                                   width=4, height=4, rng=rng))
        rating = 20.0 + 5.0 * math.sqrt(num_seg) + 3.0 * math.sqrt(num_class)
        manifest_lines.append(f"{image_id},images/{image_id}.npy,scenes,{rating!r},12")
        if symmetry:
            np.save(images_dir / f"{image_id}.npy", rng.random((20, 24)))
    write_dataset(root / "records.jsonl", records,
                  DatasetHeader(producer="fixture", created="2026-01-01T00:00:00Z"))
    (root / "manifest.csv").write_text("\n".join(manifest_lines) + "\n")
    config = {
        "seed": 424242,
        "output_dir": "out",
        "records": ["records.jsonl"],
        "manifests": [{"name": "synthetic", "path": "manifest.csv"}],
        "groupings": ["synthetic-all"],
        "custom_groupings": [{"name": "synthetic-all", "select": {"synthetic": "*"}}],
        "model_specs": [["sqrt_num_seg"], ["sqrt_num_seg", "sqrt_num_class"]],
        "k": 3,
        "repeats": 2,
        "bins_per_axis": 3,
        "images_root": ".",
        "symmetry_enabled": symmetry,
        "symmetry_scales": [4, 8],
        "resize_target": 16,
    }
    config_path = root / "config.json"
    config_path.write_text(json.dumps(config, indent=2))
    return config_path


def snapshot(directory):
    return {
        p.relative_to(directory).as_posix(): p.read_bytes()
        for p in sorted(directory.rglob("*")) if p.is_file()
    }


class TestExtract:
    def test_writes_one_row_per_record(self, tmp_path, capsys):
        config = build_fixture(tmp_path, n=5)
        assert main(["extract", "--config", str(config)]) == EXIT_OK
        lines = (tmp_path / "out" / "features.csv").read_text().splitlines()
        assert lines[0].startswith("# config_hash=")
        assert len(lines) == 2 + 5  # hash comment + header + rows

    def test_malformed_record_exits_2_with_location(self, tmp_path, capsys):
        config = build_fixture(tmp_path, n=2)
        bad = (tmp_path / "records.jsonl").read_text().splitlines()
        bad[1] = bad[1].replace('"image_width":4', '"image_width":9')
        (tmp_path / "records.jsonl").write_text("\n".join(bad) + "\n")
        assert main(["extract", "--config", str(config)]) == EXIT_INPUT
        err = capsys.readouterr().err
        assert "records.jsonl:2" in err

    def test_rerun_is_byte_identical(self, tmp_path):
        config = build_fixture(tmp_path, n=8)
        assert main(["extract", "--config", str(config)]) == EXIT_OK
        first = (tmp_path / "out" / "features.csv").read_bytes()
        assert main(["extract", "--config", str(config)]) == EXIT_OK
        assert (tmp_path / "out" / "features.csv").read_bytes() == first

    def test_symmetry_column_populated(self, tmp_path):
        config = build_fixture(tmp_path, n=4, symmetry=True)
        assert main(["extract", "--config", str(config)]) == EXIT_OK
        body = (tmp_path / "out" / "features.csv").read_text().splitlines()[2:]
        assert all(line.split(",")[5] for line in body)


class TestEval:
    def test_noiseless_spearman_is_one(self, tmp_path, capsys):
        config = build_fixture(tmp_path, n=24)
        assert main(["extract", "--config", str(config)]) == EXIT_OK
        assert main(["eval", "--config", str(config)]) == EXIT_OK
        report = json.loads(
            (tmp_path / "out" / "eval" / "synthetic_all__sqrt_num_seg+sqrt_num_class.cv.json")
            .read_text())
        assert report["mean_spearman"] == 1.0
        assert report["n_folds_scored"] == 6  # 2 repeats x 3 folds

    def test_three_specs_three_reports_and_matrix(self, tmp_path):
        config = build_fixture(tmp_path, n=24)
        assert main(["extract", "--config", str(config)]) == EXIT_OK
        assert main(["eval", "--config", str(config),
                     "--model-specs",
                     "sqrt_num_seg,sqrt_num_class,sqrt_num_seg+sqrt_num_class"]) == EXIT_INPUT
        # overriding model_specs changes the config hash -> refuses stale features
        assert main(["extract", "--config", str(config),
                     "--model-specs",
                     "sqrt_num_seg,sqrt_num_class,sqrt_num_seg+sqrt_num_class"]) == EXIT_OK
        assert main(["eval", "--config", str(config),
                     "--model-specs",
                     "sqrt_num_seg,sqrt_num_class,sqrt_num_seg+sqrt_num_class"]) == EXIT_OK
        eval_dir = tmp_path / "out" / "eval"
        assert len(list(eval_dir.glob("*.cv.json"))) == 3
        matrix = (eval_dir / "spearman_matrix.csv").read_text().splitlines()
        assert matrix[1].split(",")[0] == "model_spec"
        assert len(matrix) == 2 + 3  # hash + header + one row per spec

    def test_requires_extract_first(self, tmp_path, capsys):
        config = build_fixture(tmp_path)
        assert main(["eval", "--config", str(config)]) == EXIT_INPUT
        assert "run extract first" in capsys.readouterr().err


class TestReport:
    def test_emits_matrix_and_bingrid(self, tmp_path, capsys):
        config = build_fixture(tmp_path, n=24)
        for cmd in ("extract", "eval", "report"):
            assert main([cmd, "--config", str(config)]) == EXIT_OK
        report_dir = tmp_path / "out" / "report"
        assert (report_dir / "spearman_matrix.csv").exists()
        assert (report_dir / "synthetic_all.bingrid.csv").exists()
        assert not list(report_dir.glob("*error_vs_symmetry*"))
        assert "symmetry analysis tables omitted" in capsys.readouterr().out

    def test_symmetry_tables_when_enabled(self, tmp_path):
        config = build_fixture(tmp_path, n=24, symmetry=True)
        for cmd in ("extract", "eval", "report"):
            assert main([cmd, "--config", str(config)]) == EXIT_OK
        path = tmp_path / "out" / "report" / "synthetic_all.error_vs_symmetry.csv"
        lines = path.read_text().splitlines()
        assert lines[1].startswith("# model_spec=sqrt_num_seg+sqrt_num_class")
        assert len(lines) == 3 + 24  # hash + summary + header + rows

    def test_bingrid_counts_sum(self, tmp_path):
        config = build_fixture(tmp_path, n=24)
        for cmd in ("extract", "eval", "report"):
            assert main([cmd, "--config", str(config)]) == EXIT_OK
        rows = (tmp_path / "out" / "report" / "synthetic_all.bingrid.csv") \
            .read_text().splitlines()[2:]
        assert sum(int(r.split(",")[6]) for r in rows) == 24

    def test_refuses_mixed_config_outputs(self, tmp_path, capsys):
        config = build_fixture(tmp_path, n=24)
        for cmd in ("extract", "eval"):
            assert main([cmd, "--config", str(config)]) == EXIT_OK
        assert main(["report", "--config", str(config), "--seed", "7"]) == EXIT_INPUT
        assert "refusing to mix" in capsys.readouterr().err

    def test_requires_eval_outputs(self, tmp_path, capsys):
        config = build_fixture(tmp_path, n=24)
        assert main(["extract", "--config", str(config)]) == EXIT_OK
        assert main(["report", "--config", str(config)]) == EXIT_INPUT
        assert "run eval first" in capsys.readouterr().err


class TestFit:
    def test_models_serialized(self, tmp_path):
        config = build_fixture(tmp_path, n=24)
        assert main(["extract", "--config", str(config)]) == EXIT_OK
        assert main(["fit", "--config", str(config)]) == EXIT_OK
        path = tmp_path / "out" / "models" / "synthetic_all__sqrt_num_seg+sqrt_num_class.model.json"
        model = json.loads(path.read_text())
        assert model["labels"] == ["sqrt_num_seg", "sqrt_num_class"]
        assert model["diagnostics"]["r_squared"] == pytest.approx(1.0, abs=1e-12)
        assert model["fit_timestamp"] is None
        assert model["dataset_id"] == "synthetic-all"


class TestValidate:
    def test_clean_file_passes(self, tmp_path, capsys):
        config = build_fixture(tmp_path, n=3)
        assert main(["validate", "--config", str(config)]) == EXIT_OK
        assert "0 findings" in capsys.readouterr().out

    def test_reports_all_findings(self, tmp_path, capsys):
        config = build_fixture(tmp_path, n=3)
        lines = (tmp_path / "records.jsonl").read_text().splitlines()
        lines[1] = lines[1].replace('"image_width":4', '"image_width":0')
        lines[2] = lines[2].replace('"image_id":"img001"', '"image_id":""')
        (tmp_path / "records.jsonl").write_text("\n".join(lines) + "\n")
        assert main(["validate", "--config", str(config)]) == EXIT_INPUT
        out = capsys.readouterr().out
        assert "records.jsonl:2" in out and "records.jsonl:3" in out
        assert "2 findings" in out


class TestConfig:
    def test_missing_seed_rejected(self, tmp_path, capsys):
        config = build_fixture(tmp_path, n=3)
        raw = json.loads(config.read_text())
        del raw["seed"]
        config.write_text(json.dumps(raw))
        assert main(["extract", "--config", str(config)]) == EXIT_INPUT
        assert "seed is required" in capsys.readouterr().err

    def test_unknown_field_rejected(self, tmp_path, capsys):
        config = build_fixture(tmp_path, n=3)
        raw = json.loads(config.read_text())
        raw["sede"] = 1
        config.write_text(json.dumps(raw))
        assert main(["extract", "--config", str(config)]) == EXIT_INPUT
        assert "unknown config fields" in capsys.readouterr().err

    def test_invalid_regressor_rejected(self, tmp_path, capsys):
        config = build_fixture(tmp_path, n=3)
        assert main(["extract", "--config", str(config),
                     "--model-specs", "sqrt_numseg"]) == EXIT_INPUT
        assert "unknown regressor" in capsys.readouterr().err

    def test_lock_file_blocks_concurrent_run(self, tmp_path, capsys):
        config = build_fixture(tmp_path, n=3)
        out = tmp_path / "out"
        out.mkdir()
        (out / LOCK_FILENAME).write_text("12345")
        assert main(["extract", "--config", str(config)]) == EXIT_RUNTIME
        assert "locked" in capsys.readouterr().err

    def test_lock_released_after_run(self, tmp_path):
        config = build_fixture(tmp_path, n=3)
        assert main(["extract", "--config", str(config)]) == EXIT_OK
        assert not (tmp_path / "out" / LOCK_FILENAME).exists()


class TestPipelineDeterminism:
    def test_full_rerun_byte_identical(self, tmp_path):
        config = build_fixture(tmp_path, n=24, symmetry=True)
        for cmd in ("extract", "eval", "report"):
            assert main([cmd, "--config", str(config)]) == EXIT_OK
        first = snapshot(tmp_path / "out")
        for cmd in ("extract", "eval", "report"):
            assert main([cmd, "--config", str(config)]) == EXIT_OK
        assert snapshot(tmp_path / "out") == first
        assert first  # sanity: snapshot non-empty
