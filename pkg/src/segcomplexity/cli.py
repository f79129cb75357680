"""Command-line pipeline: validate -> extract -> fit -> eval -> report.

Every run is driven by a JSON config file; each scalar or list field can be
overridden by a long-form flag of the same name. The seed is required (there
is no wall-clock default), so identical config + inputs produce byte-identical
outputs. Every output file embeds a hash of the resolved config, and commands
refuse to mix outputs produced under a different config.

Exit codes: 0 success, 1 runtime failure, 2 input validation failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

from . import dataset as ds
from . import evaluation as ev
from . import features as ft
from . import maskio, regress

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_INPUT = 2

VALID_REGRESSORS = ("sqrt_num_seg", "sqrt_num_class", "patch_symm")

LOCK_FILENAME = ".segcomplexity.lock"


class ConfigError(ValueError):
    """Bad pipeline configuration."""


class LockError(RuntimeError):
    """Another invocation holds the output-directory lock."""


_INPUT_ERRORS = (
    ConfigError,
    maskio.MaskFormatError,
    maskio.RecordParseError,
    ds.ManifestError,
    ds.GroupingError,
    ds.ConstantRatingsError,
    ds.MissingFeaturesError,
    ft.MissingImageError,
    ft.SymmetryConfigError,
    regress.MissingRegressorError,
    regress.RankDeficiencyError,
    ev.UndefinedCorrelationError,
)


@dataclass
class PipelineConfig:
    seed: int
    output_dir: str = "out"
    records: list[str] = field(default_factory=list)
    manifests: list[dict[str, str]] = field(default_factory=list)  # {"name","path"}
    groupings: list[str] = field(default_factory=list)
    custom_groupings: list[dict[str, Any]] = field(default_factory=list)
    model_specs: list[list[str]] = field(default_factory=list)
    k: int = 3
    repeats: int | None = None  # None = auto schedule
    pooled: bool = False
    bins_per_axis: int = 4
    images_root: str = "."
    normalization: str = "minmax"
    error_model_spec: list[str] = field(default_factory=lambda: ["sqrt_num_seg", "sqrt_num_class"])
    symmetry_enabled: bool = False
    symmetry_scales: list[int] = field(default_factory=lambda: list(ft.DEFAULT_SYMMETRY_SCALES))
    resize_target: int = ft.DEFAULT_RESIZE_TARGET
    run_timestamp: str | None = None
    base_dir: Path = field(default_factory=Path, repr=False)

    _HASH_EXCLUDED = ("base_dir",)

    def resolved(self) -> dict[str, Any]:
        out = {}
        for name in self.__dataclass_fields__:
            if name in self._HASH_EXCLUDED:
                continue
            out[name] = getattr(self, name)
        return out

    @property
    def config_hash(self) -> str:
        blob = json.dumps(self.resolved(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]

    def path(self, p: str) -> Path:
        """Resolve a config-relative path."""
        q = Path(p)
        return q if q.is_absolute() else self.base_dir / q

    @property
    def out(self) -> Path:
        return self.path(self.output_dir)

    def feature_config(self) -> ft.FeatureConfig:
        return ft.FeatureConfig(
            with_symmetry=self.symmetry_enabled,
            symmetry_scales=tuple(self.symmetry_scales),
            resize_target=self.resize_target,
        )

    def grouping_schemes(self) -> list[ds.GroupingScheme | str]:
        custom = {}
        for g in self.custom_groupings:
            select = {}
            for ds_name, cats in g["select"].items():
                select[ds_name] = None if cats == "*" else list(cats)
            custom[g["name"]] = ds.GroupingScheme(
                name=g["name"],
                select=tuple((k, None if v is None else tuple(v)) for k, v in select.items()),
            )
        return [custom.get(name, name) for name in self.groupings]


def _validate_config(cfg: PipelineConfig) -> PipelineConfig:
    if not isinstance(cfg.seed, int) or isinstance(cfg.seed, bool) or cfg.seed < 0:
        raise ConfigError(f"seed must be a non-negative integer, got {cfg.seed!r}")
    if cfg.k < 2:
        raise ConfigError(f"k must be >= 2, got {cfg.k}")
    if not cfg.model_specs:
        raise ConfigError("model_specs must name at least one model")
    for spec in cfg.model_specs:
        if not spec:
            raise ConfigError("each model spec must name at least one regressor")
        for label in spec:
            if label not in VALID_REGRESSORS:
                raise ConfigError(
                    f"unknown regressor {label!r}; valid: {VALID_REGRESSORS}")
    if cfg.repeats is not None and cfg.repeats < 1:
        raise ConfigError(f"repeats must be >= 1 or null for the auto schedule")
    if cfg.bins_per_axis < 2:
        raise ConfigError(f"bins_per_axis must be >= 2, got {cfg.bins_per_axis}")
    return cfg


def load_config(path: str | Path, overrides: dict[str, Any] | None = None) -> PipelineConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid config JSON: {e}")
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    known = {f for f in PipelineConfig.__dataclass_fields__ if f != "base_dir"}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"{path}: unknown config fields {sorted(unknown)}")
    if overrides:
        raw.update(overrides)
    if "seed" not in raw:
        raise ConfigError(f"{path}: seed is required (no wall-clock default)")
    if raw.get("repeats") == "auto":
        raw["repeats"] = None
    try:
        cfg = PipelineConfig(base_dir=path.parent, **raw)
    except TypeError as e:
        raise ConfigError(f"{path}: {e}")
    return _validate_config(cfg)


# --- flag overrides -----------------------------------------------------------

def _parse_bool(s: str) -> bool:
    if s.lower() in ("true", "1", "yes"):
        return True
    if s.lower() in ("false", "0", "no"):
        return False
    raise argparse.ArgumentTypeError(f"expected true/false, got {s!r}")


def _parse_repeats(s: str):
    return None if s == "auto" else int(s)


def _parse_int_list(s: str) -> list[int]:
    return [int(x) for x in s.split(",") if x]


def _parse_str_list(s: str) -> list[str]:
    return [x for x in s.split(",") if x]


def _parse_specs(s: str) -> list[list[str]]:
    return [spec.split("+") for spec in s.split(",") if spec]


def _parse_manifests(s: str) -> list[dict[str, str]]:
    out = []
    for item in s.split(","):
        if not item:
            continue
        name, _, p = item.partition("=")
        if not p:
            raise argparse.ArgumentTypeError(
                f"manifest override must look like name=path, got {item!r}")
        out.append({"name": name, "path": p})
    return out


# field name -> (flag value parser, help)
_OVERRIDABLE = {
    "seed": (int, "global random seed"),
    "output_dir": (str, "output directory"),
    "records": (_parse_str_list, "comma-separated record files"),
    "manifests": (_parse_manifests, "comma-separated name=path manifest entries"),
    "groupings": (_parse_str_list, "comma-separated image-set grouping names"),
    "model_specs": (_parse_specs, "comma-separated specs, regressors joined by +"),
    "k": (int, "fold count"),
    "repeats": (_parse_repeats, "CV repeats M, or 'auto'"),
    "pooled": (_parse_bool, "pool test folds per repeat before Spearman"),
    "bins_per_axis": (int, "bins per axis for the binned analysis"),
    "images_root": (str, "base directory for manifest image paths"),
    "normalization": (str, "rating normalization method"),
    "error_model_spec": (_parse_str_list, "spec for the error-vs-symmetry analysis"),
    "symmetry_enabled": (_parse_bool, "extract patch symmetry"),
    "symmetry_scales": (_parse_int_list, "comma-separated patch scales"),
    "resize_target": (int, "shorter-side resize target before symmetry"),
    "run_timestamp": (str, "timestamp recorded in fitted models"),
}


def _add_common_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", required=True, help="pipeline config JSON")
    for name, (parse, help_text) in _OVERRIDABLE.items():
        parser.add_argument(f"--{name.replace('_', '-')}", dest=f"override_{name}",
                            type=parse, default=None, help=help_text, metavar="V")


def _collect_overrides(args: argparse.Namespace) -> dict[str, Any]:
    out = {}
    for name in _OVERRIDABLE:
        value = getattr(args, f"override_{name}", None)
        if value is not None:
            out[name] = value
    return out


# --- output-directory lock ------------------------------------------------------

class _OutputLock:
    def __init__(self, out_dir: Path):
        self.path = out_dir / LOCK_FILENAME
        self.fd: int | None = None

    def __enter__(self):
        self.path.parent.mkdir(parents=True, exist_ok=True)
        try:
            self.fd = os.open(self.path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            raise LockError(
                f"output directory is locked by {self.path}; another invocation "
                "may be running (delete the lock file if it is stale)")
        os.write(self.fd, str(os.getpid()).encode())
        return self

    def __exit__(self, *exc):
        if self.fd is not None:
            os.close(self.fd)
            self.path.unlink(missing_ok=True)
        return False


# --- helpers --------------------------------------------------------------------

def _slug(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9]+", "_", name).strip("_").lower()


def _spec_key(spec: Sequence[str]) -> str:
    return "+".join(spec)


def _read_manifests(cfg: PipelineConfig) -> list[ds.DatasetManifest]:
    if not cfg.manifests:
        raise ConfigError("config has no manifests")
    return [ds.read_manifest(cfg.path(m["path"]), name=m["name"]) for m in cfg.manifests]


def _load_features(cfg: PipelineConfig) -> dict[str, ft.FeatureVector]:
    path = cfg.out / "features.csv"
    if not path.exists():
        raise ConfigError(f"missing upstream output {path}; run extract first")
    file_hash, vectors = ft.read_features_csv(path)
    if file_hash != cfg.config_hash:
        raise ConfigError(
            f"{path} was produced under config hash {file_hash}, current is "
            f"{cfg.config_hash}; refusing to mix outputs")
    return vectors


def _image_sets(cfg: PipelineConfig, features: dict[str, ft.FeatureVector]) -> list[ds.ImageSet]:
    if not cfg.groupings:
        raise ConfigError("config has no groupings")
    manifests = _read_manifests(cfg)
    return ds.build_image_sets(manifests, cfg.grouping_schemes(), features,
                               method=cfg.normalization)


def _write_matrix_csv(path: Path, specs: list[list[str]], set_names: list[str],
                      cells: dict[tuple[str, str], float], config_hash: str) -> None:
    import csv as _csv

    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(f"# config_hash={config_hash}\n")
        writer = _csv.writer(fh, lineterminator="\n")
        writer.writerow(["model_spec", *set_names])
        for spec in specs:
            key = _spec_key(spec)
            writer.writerow([key, *[repr(cells[(key, s)]) for s in set_names]])


# --- commands --------------------------------------------------------------------

def cmd_validate(cfg: PipelineConfig) -> int:
    """Validate record files; report every finding instead of failing fast."""
    if not cfg.records:
        raise ConfigError("config has no record files")
    n_findings = 0
    n_records = 0
    for rec_path in cfg.records:
        path = cfg.path(rec_path)
        offset = 0
        header_seen = False
        with open(path, "rb") as fh:
            for lineno, raw in enumerate(fh, start=1):
                line = raw.rstrip(b"\r\n")
                if not line.strip():
                    offset += len(raw)
                    continue
                if not header_seen:
                    header_seen = True
                    try:
                        obj = json.loads(line.decode("utf-8"))
                        if obj.get("format_version") != maskio.FORMAT_VERSION:
                            print(f"{path}:{lineno}: unsupported format_version "
                                  f"{obj.get('format_version')!r}")
                            n_findings += 1
                    except (json.JSONDecodeError, UnicodeDecodeError) as e:
                        print(f"{path}:{lineno}: invalid header: {e}")
                        n_findings += 1
                else:
                    n_records += 1
                    try:
                        record = maskio.load_record(line, byte_offset=offset)
                    except (maskio.RecordParseError, maskio.MaskFormatError) as e:
                        print(f"{path}:{lineno}: {e}")
                        n_findings += 1
                    else:
                        report = maskio.validate_record(record)
                        for w in report.warnings:
                            print(f"{path}:{lineno}: warning: {w}")
                offset += len(raw)
        if not header_seen:
            print(f"{path}: empty dataset file (missing header line)")
            n_findings += 1
    print(f"validated {n_records} records, {n_findings} findings")
    return EXIT_OK if n_findings == 0 else EXIT_INPUT


def cmd_extract(cfg: PipelineConfig) -> int:
    """Feature CSV from record files (plus images when symmetry is enabled)."""
    if not cfg.records:
        raise ConfigError("config has no record files")
    _, records = maskio.read_datasets([cfg.path(p) for p in cfg.records])
    feature_config = cfg.feature_config()

    image_paths: dict[str, str] = {}
    if feature_config.with_symmetry:
        for manifest in _read_manifests(cfg):
            for row in manifest.rows:
                image_paths[row.image_id] = row.image_path

    vectors = []
    root = cfg.path(cfg.images_root)
    for record in sorted(records, key=lambda r: r.image_id):
        image = None
        if feature_config.with_symmetry:
            rel = image_paths.get(record.image_id)
            if rel is None:
                raise ConfigError(
                    f"symmetry enabled but no manifest image path for "
                    f"image_id {record.image_id!r}")
            image = ft.load_gray_image(root / rel)
        vectors.append(ft.build_feature_vector(record, image=image, config=feature_config))

    cfg.out.mkdir(parents=True, exist_ok=True)
    out_path = cfg.out / "features.csv"
    ft.write_features_csv(out_path, vectors, config_hash=cfg.config_hash)
    print(f"wrote {len(vectors)} feature rows to {out_path}")
    return EXIT_OK


def cmd_fit(cfg: PipelineConfig) -> int:
    """Fit one model per (image-set, model spec) on all rows; serialize each."""
    features = _load_features(cfg)
    image_sets = _image_sets(cfg, features)
    models_dir = cfg.out / "models"
    models_dir.mkdir(parents=True, exist_ok=True)
    for image_set in image_sets:
        for spec in cfg.model_specs:
            X = regress.DesignMatrix.from_features(image_set.feature_rows(), spec)
            model = regress.fit_ols(X, image_set.ratings(), dataset_id=image_set.name,
                                    fit_timestamp=cfg.run_timestamp)
            path = models_dir / f"{_slug(image_set.name)}__{_spec_key(spec)}.model.json"
            regress.save_model(path, model, config_hash=cfg.config_hash)
            print(f"fit {image_set.name} / {_spec_key(spec)}: "
                  f"r_squared={model.r_squared:.4f} -> {path}")
    return EXIT_OK


def cmd_eval(cfg: PipelineConfig) -> int:
    """Repeated k-fold CV per (image-set, model spec) plus the comparison matrix."""
    features = _load_features(cfg)
    image_sets = _image_sets(cfg, features)
    eval_dir = cfg.out / "eval"
    eval_dir.mkdir(parents=True, exist_ok=True)
    cells: dict[tuple[str, str], float] = {}
    for image_set in image_sets:
        for spec in cfg.model_specs:
            report = ev.cross_validate(image_set, spec, k=cfg.k, repeats=cfg.repeats,
                                       seed=cfg.seed, pooled=cfg.pooled)
            stem = f"{_slug(image_set.name)}__{_spec_key(spec)}"
            ev.write_cv_report_json(eval_dir / f"{stem}.cv.json", report,
                                    config_hash=cfg.config_hash)
            ev.write_cv_folds_csv(eval_dir / f"{stem}.folds.csv", report,
                                  config_hash=cfg.config_hash)
            cells[(_spec_key(spec), image_set.name)] = report.mean_spearman
            excluded = f", {len(report.excluded)} folds excluded" if report.excluded else ""
            print(f"eval {image_set.name} / {_spec_key(spec)}: mean test Spearman "
                  f"{report.mean_spearman:.4f} over {len(report.fold_scores)} folds{excluded}")
    _write_matrix_csv(eval_dir / "spearman_matrix.csv", cfg.model_specs,
                      [s.name for s in image_sets], cells, cfg.config_hash)
    return EXIT_OK


def cmd_report(cfg: PipelineConfig) -> int:
    """Summary tables: Spearman matrix, bin grids, error-vs-symmetry plot data."""
    features = _load_features(cfg)
    image_sets = _image_sets(cfg, features)
    eval_dir = cfg.out / "eval"
    report_dir = cfg.out / "report"
    report_dir.mkdir(parents=True, exist_ok=True)

    cells: dict[tuple[str, str], float] = {}
    for image_set in image_sets:
        for spec in cfg.model_specs:
            stem = f"{_slug(image_set.name)}__{_spec_key(spec)}"
            path = eval_dir / f"{stem}.cv.json"
            if not path.exists():
                raise ConfigError(f"missing upstream output {path}; run eval first")
            obj = json.loads(path.read_text(encoding="utf-8"))
            if obj.get("config_hash") != cfg.config_hash:
                raise ConfigError(
                    f"{path} was produced under config hash {obj.get('config_hash')}, "
                    f"current is {cfg.config_hash}; refusing to mix outputs")
            cells[(_spec_key(spec), image_set.name)] = float(obj["mean_spearman"])
    _write_matrix_csv(report_dir / "spearman_matrix.csv", cfg.model_specs,
                      [s.name for s in image_sets], cells, cfg.config_hash)

    for image_set in image_sets:
        grid = ev.binned_stats(image_set.feature_rows(), image_set.ratings(),
                               bins_per_axis=cfg.bins_per_axis)
        ev.write_bin_grid_csv(report_dir / f"{_slug(image_set.name)}.bingrid.csv",
                              grid, config_hash=cfg.config_hash)

    if not cfg.symmetry_enabled:
        print("patch symmetry disabled; symmetry analysis tables omitted")
        return EXIT_OK

    for image_set in image_sets:
        rows = image_set.rows
        if any(r.features.patch_symm is None for r in rows):
            raise ConfigError(
                f"image-set {image_set.name!r} lacks patch_symm values; "
                "re-run extract with symmetry enabled")
        X = regress.DesignMatrix.from_features(image_set.feature_rows(),
                                               cfg.error_model_spec)
        model = regress.fit_ols(X, image_set.ratings(), dataset_id=image_set.name)
        preds = regress.predict_design(model, X)
        fit = ev.error_vs_symmetry(preds, image_set.ratings(),
                                   [r.features.patch_symm for r in rows])
        path = report_dir / f"{_slug(image_set.name)}.error_vs_symmetry.csv"
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(f"# config_hash={cfg.config_hash}\n")
            fh.write(f"# model_spec={_spec_key(cfg.error_model_spec)} "
                     f"slope={fit.slope!r} intercept={fit.intercept!r} "
                     f"pearson_r={fit.pearson_r!r} n={fit.n}\n")
            import csv as _csv

            writer = _csv.writer(fh, lineterminator="\n")
            writer.writerow(["image_id", "prediction", "ground_truth", "error", "patch_symm"])
            for row, pred in zip(rows, preds):
                writer.writerow([row.image_id, repr(float(pred)), repr(row.rating),
                                 repr(float(pred) - row.rating), repr(row.features.patch_symm)])
        print(f"error-vs-symmetry for {image_set.name}: pearson_r={fit.pearson_r:.4f}")
    return EXIT_OK


_COMMANDS = {
    "validate": (cmd_validate, False),
    "extract": (cmd_extract, True),
    "fit": (cmd_fit, True),
    "eval": (cmd_eval, True),
    "report": (cmd_report, True),
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="segcomplexity",
        description="Visual complexity from segmentation-derived features.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (fn, _) in _COMMANDS.items():
        p = sub.add_parser(name, help=fn.__doc__)
        _add_common_args(p)
    args = parser.parse_args(argv)

    fn, needs_lock = _COMMANDS[args.command]
    try:
        cfg = load_config(args.config, _collect_overrides(args))
        if needs_lock:
            with _OutputLock(cfg.out):
                return fn(cfg)
        return fn(cfg)
    except _INPUT_ERRORS as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except LockError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
