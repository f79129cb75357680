"""Evaluation protocol: rank correlations, repeated k-fold CV, binned stats.

Spearman is Pearson on average ranks (mid-rank tie handling), the primary
performance metric. Cross-validation is repeated M times with fresh fold
shuffles; every (repeat, fold) fits on the train folds only and scores the
held-out fold, and the report aggregates the arithmetic mean over all scored
test folds. Degenerate folds (constant predictions or ratings) are excluded
and counted, never silently averaged over.

Randomness is a single documented generator: numpy's PCG64 seeded with the
pair (global_seed, repeat_index), so reports are bit-reproducible across
machines. Repeats and folds are independent; callers may fan them out in
parallel as long as the report assembly stays single-threaded.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .dataset import ImageSet
from .features import FeatureVector
from .regress import DesignMatrix, fit_ols, predict_design


class UndefinedCorrelationError(ValueError):
    """Correlation is undefined (constant input or fewer than 3 points)."""


def average_ranks(values: Sequence[float] | np.ndarray) -> np.ndarray:
    """1-based ranks; ties receive the mean of the rank range they span."""
    arr = np.asarray(values, dtype=float)
    order = np.argsort(arr, kind="stable")
    sorted_vals = arr[order]
    new_group = np.empty(arr.size, dtype=bool)
    new_group[0] = True
    new_group[1:] = sorted_vals[1:] != sorted_vals[:-1]
    group_ids = np.cumsum(new_group) - 1
    counts = np.bincount(group_ids)
    ends = np.cumsum(counts).astype(float)
    starts = ends - counts + 1.0
    group_rank = (starts + ends) / 2.0
    ranks = np.empty(arr.size, dtype=float)
    ranks[order] = group_rank[group_ids]
    return ranks


def _corr_inputs(x, y) -> tuple[np.ndarray, np.ndarray]:
    xa = np.asarray(x, dtype=float)
    ya = np.asarray(y, dtype=float)
    if xa.shape != ya.shape or xa.ndim != 1:
        raise ValueError(f"expected equal-length vectors, got {xa.shape} and {ya.shape}")
    if xa.size < 3:
        raise UndefinedCorrelationError(f"need at least 3 points, got {xa.size}")
    return xa, ya


def pearson(x: Sequence[float], y: Sequence[float]) -> float:
    """Product-moment correlation; raises on constant input."""
    xa, ya = _corr_inputs(x, y)
    xc = xa - xa.mean()
    yc = ya - ya.mean()
    sxx = float(xc @ xc)
    syy = float(yc @ yc)
    if sxx == 0.0 or syy == 0.0:
        raise UndefinedCorrelationError("correlation undefined for a constant vector")
    # Single sqrt of the product keeps pearson(v, v) == 1.0 exactly.
    return float(xc @ yc) / math.sqrt(sxx * syy)


def spearman(x: Sequence[float], y: Sequence[float]) -> float:
    """Pearson correlation of average ranks."""
    xa, ya = _corr_inputs(x, y)
    if np.all(xa == xa[0]) or np.all(ya == ya[0]):
        raise UndefinedCorrelationError("correlation undefined for a constant vector")
    return pearson(average_ranks(xa), average_ranks(ya))


# --- fold machinery ----------------------------------------------------------

@dataclass(frozen=True)
class FoldAssignment:
    """Deterministic partition of image ids into k folds."""

    seed: int
    repeat_index: int
    k: int
    assignment: Mapping[str, int]

    def test_ids(self, fold: int) -> list[str]:
        return [i for i, f in self.assignment.items() if f == fold]

    def train_ids(self, fold: int) -> list[str]:
        return [i for i, f in self.assignment.items() if f != fold]


def kfold_splits(ids: Iterable[str], k: int, seed: int, repeat_index: int) -> FoldAssignment:
    """Shuffle the sorted ids with PCG64 seeded on (seed, repeat_index) and
    deal them round-robin, so fold sizes differ by at most one."""
    sorted_ids = sorted(ids)
    if k < 2:
        raise ValueError(f"k must be >= 2, got {k}")
    if k > len(sorted_ids):
        raise ValueError(f"cannot split {len(sorted_ids)} ids into {k} folds")
    if seed < 0 or repeat_index < 0:
        raise ValueError("seed and repeat_index must be non-negative")
    rng = np.random.default_rng([seed, repeat_index])
    perm = rng.permutation(len(sorted_ids))
    assignment = {sorted_ids[j]: int(i % k) for i, j in enumerate(perm)}
    # dict in sorted-id order keeps downstream iteration deterministic
    assignment = {i: assignment[i] for i in sorted_ids}
    return FoldAssignment(seed=seed, repeat_index=repeat_index, k=k, assignment=assignment)


def default_repeats(n: int, budget: int = 1500, max_repeats: int = 30) -> int:
    """Repeat schedule: more repeats for smaller image-sets.

    clamp(round(budget / n), 1, max_repeats) with round-half-up, e.g.
    n=49 -> 30 (clamped), n=1500 -> 1.
    """
    if n < 1:
        raise ValueError("image-set size must be positive")
    return max(1, min(max_repeats, int(math.floor(budget / n + 0.5))))


# --- cross-validation --------------------------------------------------------

@dataclass(frozen=True)
class FoldScore:
    repeat: int
    fold: int | None  # None for pooled-per-repeat scores
    spearman: float
    n_test: int


@dataclass(frozen=True)
class ExcludedFold:
    repeat: int
    fold: int | None
    reason: str


@dataclass
class CvReport:
    """Per-(repeat, fold) test Spearman values and their mean."""

    image_set: str
    model_spec: tuple[str, ...]
    k: int
    repeats: int
    seed: int
    pooled: bool
    fold_scores: list[FoldScore] = field(default_factory=list)
    excluded: list[ExcludedFold] = field(default_factory=list)

    @property
    def mean_spearman(self) -> float:
        if not self.fold_scores:
            return float("nan")
        return float(np.mean([s.spearman for s in self.fold_scores]))

    def to_json(self, config_hash: str | None = None) -> dict[str, Any]:
        out: dict[str, Any] = {
            "image_set": self.image_set,
            "model_spec": list(self.model_spec),
            "k": self.k,
            "repeats": self.repeats,
            "seed": self.seed,
            "pooled": self.pooled,
            "mean_spearman": self.mean_spearman,
            "n_folds_scored": len(self.fold_scores),
            "n_folds_excluded": len(self.excluded),
            "fold_scores": [
                {"repeat": s.repeat, "fold": s.fold, "spearman": s.spearman,
                 "n_test": s.n_test}
                for s in self.fold_scores
            ],
            "excluded": [
                {"repeat": e.repeat, "fold": e.fold, "reason": e.reason}
                for e in self.excluded
            ],
        }
        if config_hash is not None:
            out["config_hash"] = config_hash
        return out


def cross_validate(image_set: ImageSet, model_spec: Sequence[str], k: int = 3,
                   repeats: int | None = None, seed: int = 0,
                   pooled: bool = False) -> CvReport:
    """Repeated k-fold CV of an OLS model on one image-set.

    For every (repeat, fold): fit on the train folds, predict the held-out
    fold, record the test Spearman. No image is ever scored by a model that
    saw it during fitting. ``repeats=None`` applies the default schedule.
    """
    model_spec = tuple(model_spec)
    if not model_spec:
        raise ValueError("model_spec must name at least one regressor")
    rows = {row.image_id: row for row in image_set.rows}
    ids = sorted(rows)
    n = len(ids)
    minimum = k * (len(model_spec) + 2)
    if n < minimum:
        raise ValueError(
            f"image-set {image_set.name!r} has {n} rows; need >= {minimum} "
            f"for k={k} and {len(model_spec)} regressors")
    if repeats is None:
        repeats = default_repeats(n)

    report = CvReport(image_set=image_set.name, model_spec=model_spec,
                      k=k, repeats=repeats, seed=seed, pooled=pooled)
    for repeat in range(repeats):
        folds = kfold_splits(ids, k=k, seed=seed, repeat_index=repeat)
        pooled_pred: list[float] = []
        pooled_true: list[float] = []
        for fold in range(k):
            train = [rows[i] for i in folds.train_ids(fold)]
            test = [rows[i] for i in folds.test_ids(fold)]
            X_train = DesignMatrix.from_features([r.features for r in train], model_spec)
            model = fit_ols(X_train, [r.rating for r in train])
            X_test = DesignMatrix.from_features([r.features for r in test], model_spec)
            preds = predict_design(model, X_test)
            truth = np.array([r.rating for r in test], dtype=float)
            if pooled:
                pooled_pred.extend(preds.tolist())
                pooled_true.extend(truth.tolist())
                continue
            try:
                rho = spearman(preds, truth)
            except UndefinedCorrelationError as e:
                report.excluded.append(ExcludedFold(repeat=repeat, fold=fold, reason=str(e)))
                continue
            report.fold_scores.append(
                FoldScore(repeat=repeat, fold=fold, spearman=rho, n_test=len(test)))
        if pooled:
            try:
                rho = spearman(pooled_pred, pooled_true)
            except UndefinedCorrelationError as e:
                report.excluded.append(ExcludedFold(repeat=repeat, fold=None, reason=str(e)))
                continue
            report.fold_scores.append(
                FoldScore(repeat=repeat, fold=None, spearman=rho, n_test=len(pooled_pred)))
    return report


# --- binned ground-truth statistics -------------------------------------------

@dataclass
class BinGrid:
    """Equal-width 2-D binning of (sqrt_num_seg, sqrt_num_class) with
    per-cell count, mean, and population std of the ground-truth ratings."""

    x_label: str
    y_label: str
    x_edges: np.ndarray
    y_edges: np.ndarray
    counts: np.ndarray   # (nx, ny) ints
    means: np.ndarray    # NaN where a cell is empty
    stds: np.ndarray     # NaN where a cell is empty
    warnings: list[str] = field(default_factory=list)


def _axis_bins(values: np.ndarray, bins: int, label: str) -> tuple[np.ndarray, np.ndarray, str | None]:
    lo = float(values.min())
    hi = float(values.max())
    if lo == hi:
        # Degenerate axis: single bin covering the lone value.
        return np.array([lo, hi]), np.zeros(values.size, dtype=int), \
            f"axis {label!r} is constant ({lo}); fell back to a single bin"
    edges = np.linspace(lo, hi, bins + 1)
    # Bin rule (shared with the brute-force oracle):
    #   index = min(floor((v - lo) * bins / (hi - lo)), bins - 1)
    idx = np.floor((values - lo) * bins / (hi - lo)).astype(int)
    idx = np.clip(idx, 0, bins - 1)
    return edges, idx, None


def binned_stats(features: Sequence[FeatureVector], ratings: Sequence[float],
                 bins_per_axis: int) -> BinGrid:
    """Per-cell count / mean / population std of ratings over the feature plane."""
    if bins_per_axis < 2:
        raise ValueError(f"bins_per_axis must be >= 2, got {bins_per_axis}")
    if not features:
        raise ValueError("features must be non-empty")
    r = np.asarray(ratings, dtype=float)
    if r.shape != (len(features),):
        raise ValueError("features and ratings must have equal length")
    x = np.array([f.sqrt_num_seg for f in features], dtype=float)
    y = np.array([f.sqrt_num_class for f in features], dtype=float)

    warnings: list[str] = []
    x_edges, xi, warn = _axis_bins(x, bins_per_axis, "sqrt_num_seg")
    if warn:
        warnings.append(warn)
    y_edges, yi, warn = _axis_bins(y, bins_per_axis, "sqrt_num_class")
    if warn:
        warnings.append(warn)
    nx = len(x_edges) - 1
    ny = len(y_edges) - 1

    flat = xi * ny + yi
    ncells = nx * ny
    counts = np.bincount(flat, minlength=ncells)
    sums = np.bincount(flat, weights=r, minlength=ncells)
    with np.errstate(invalid="ignore", divide="ignore"):
        means = np.where(counts > 0, sums / counts, np.nan)
        # Two-pass variance: stable enough to match the brute-force oracle.
        dev2 = (r - means[flat]) ** 2
        var = np.where(counts > 0,
                       np.bincount(flat, weights=dev2, minlength=ncells) / counts,
                       np.nan)
    stds = np.sqrt(var)
    return BinGrid(
        x_label="sqrt_num_seg", y_label="sqrt_num_class",
        x_edges=x_edges, y_edges=y_edges,
        counts=counts.reshape(nx, ny),
        means=means.reshape(nx, ny),
        stds=stds.reshape(nx, ny),
        warnings=warnings,
    )


# --- prediction-error vs patch-symmetry ---------------------------------------

@dataclass(frozen=True)
class ErrorSymmetryFit:
    """Simple regression of (prediction - ground truth) on patch symmetry."""

    slope: float
    intercept: float
    pearson_r: float
    n: int


def error_vs_symmetry(predictions: Sequence[float], ground_truth: Sequence[float],
                      patch_symm: Sequence[float]) -> ErrorSymmetryFit:
    preds = np.asarray(predictions, dtype=float)
    truth = np.asarray(ground_truth, dtype=float)
    symm = np.asarray(patch_symm, dtype=float)
    if not (preds.shape == truth.shape == symm.shape) or preds.ndim != 1:
        raise ValueError("predictions, ground_truth and patch_symm must have equal length")
    if preds.size < 3:
        raise UndefinedCorrelationError(f"need at least 3 points, got {preds.size}")
    error = preds - truth
    sc = symm - symm.mean()
    sss = float(sc @ sc)
    if sss == 0.0:
        raise UndefinedCorrelationError("patch-symmetry vector is constant")
    slope = float(sc @ (error - error.mean())) / sss
    intercept = float(error.mean() - slope * symm.mean())
    r = pearson(symm, error)  # raises when the error vector is constant
    return ErrorSymmetryFit(slope=slope, intercept=intercept, pearson_r=r, n=preds.size)


# --- report serialization ------------------------------------------------------

def write_cv_report_json(path: str | Path, report: CvReport,
                         config_hash: str | None = None) -> None:
    Path(path).write_text(
        json.dumps(report.to_json(config_hash), indent=2) + "\n", encoding="utf-8")


def write_cv_folds_csv(path: str | Path, report: CvReport,
                       config_hash: str | None = None) -> None:
    """Flat table: one row per scored repeat x fold."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        if config_hash is not None:
            fh.write(f"# config_hash={config_hash}\n")
        fh.write(f"# seed={report.seed} k={report.k} repeats={report.repeats} "
                 f"pooled={report.pooled}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["image_set", "model_spec", "repeat", "fold", "spearman", "n_test"])
        spec = "+".join(report.model_spec)
        for s in report.fold_scores:
            writer.writerow([report.image_set, spec, s.repeat,
                             "" if s.fold is None else s.fold,
                             repr(s.spearman), s.n_test])


def write_bin_grid_csv(path: str | Path, grid: BinGrid,
                       config_hash: str | None = None) -> None:
    """Flat table: one row per cell; empty cells keep blank mean/std."""
    nx, ny = grid.counts.shape
    with open(path, "w", encoding="utf-8", newline="") as fh:
        if config_hash is not None:
            fh.write(f"# config_hash={config_hash}\n")
        for w in grid.warnings:
            fh.write(f"# warning: {w}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([f"{grid.x_label}_bin", f"{grid.y_label}_bin",
                         "x_lo", "x_hi", "y_lo", "y_hi", "count", "mean", "std"])
        for i in range(nx):
            for j in range(ny):
                count = int(grid.counts[i, j])
                writer.writerow([
                    i, j,
                    repr(float(grid.x_edges[i])), repr(float(grid.x_edges[i + 1])),
                    repr(float(grid.y_edges[j])), repr(float(grid.y_edges[j + 1])),
                    count,
                    repr(float(grid.means[i, j])) if count else "",
                    repr(float(grid.stds[i, j])) if count else "",
                ])
