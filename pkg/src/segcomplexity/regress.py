"""Multiple linear regression mapping transformed features to complexity.

Fitting goes through a pivoted QR factorization rather than the normal
equations: rank deficiency is detected from the R diagonal and reported as an
error naming the dependent columns instead of being papered over with a
pseudo-inverse. An intercept column is always included. Predictions are not
clamped; a fitted model can legitimately predict outside [0, 100].
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np
import scipy.linalg

from .features import FeatureVector

INTERCEPT_LABEL = "intercept"


class RankDeficiencyError(ValueError):
    """The design matrix has linearly dependent columns."""

    def __init__(self, columns: Sequence[str], rank: int, n_columns: int):
        self.columns = tuple(columns)
        super().__init__(
            f"design matrix is rank deficient (rank {rank} of {n_columns} columns); "
            f"columns dependent on the others: {', '.join(self.columns)}"
        )


class MissingRegressorError(KeyError):
    """A model coefficient has no matching feature value."""


@dataclass(frozen=True)
class DesignMatrix:
    """n x (1+k) matrix whose first column is the intercept's ones."""

    labels: tuple[str, ...]
    values: np.ndarray

    @classmethod
    def from_features(cls, rows: Sequence[FeatureVector | Mapping[str, float]],
                      labels: Sequence[str]) -> "DesignMatrix":
        labels = tuple(labels)
        if not labels:
            raise ValueError("at least one regressor label is required")
        cols = np.empty((len(rows), 1 + len(labels)), dtype=float)
        cols[:, 0] = 1.0
        for i, row in enumerate(rows):
            values = row.regressors() if isinstance(row, FeatureVector) else row
            for j, label in enumerate(labels):
                if label not in values or values[label] is None:
                    raise MissingRegressorError(
                        f"feature row {i} is missing regressor {label!r}")
                cols[i, 1 + j] = values[label]
        return cls(labels=labels, values=cols)

    @property
    def column_names(self) -> tuple[str, ...]:
        return (INTERCEPT_LABEL, *self.labels)


@dataclass(frozen=True)
class RegressionModel:
    """OLS fit: intercept, labeled coefficients, and training diagnostics."""

    labels: tuple[str, ...]
    intercept: float
    coefficients: tuple[float, ...]
    rss: float
    r_squared: float
    n_rows: int
    dataset_id: str | None = None
    fit_timestamp: str | None = None

    def coefficient(self, label: str) -> float:
        try:
            return self.coefficients[self.labels.index(label)]
        except ValueError:
            raise MissingRegressorError(f"model has no coefficient for {label!r}") from None

    def to_json(self) -> dict[str, Any]:
        return {
            "labels": list(self.labels),
            "intercept": self.intercept,
            "coefficients": {label: c for label, c in zip(self.labels, self.coefficients)},
            "diagnostics": {"rss": self.rss, "r_squared": self.r_squared,
                            "n_rows": self.n_rows},
            "fit_timestamp": self.fit_timestamp,
            "dataset_id": self.dataset_id,
        }

    @classmethod
    def from_json(cls, obj: Mapping[str, Any]) -> "RegressionModel":
        labels = tuple(obj["labels"])
        coeffs = obj["coefficients"]
        diag = obj.get("diagnostics", {})
        return cls(
            labels=labels,
            intercept=float(obj["intercept"]),
            coefficients=tuple(float(coeffs[label]) for label in labels),
            rss=float(diag.get("rss", float("nan"))),
            r_squared=float(diag.get("r_squared", float("nan"))),
            n_rows=int(diag.get("n_rows", 0)),
            dataset_id=obj.get("dataset_id"),
            fit_timestamp=obj.get("fit_timestamp"),
        )


def fit_ols(X: DesignMatrix, y: Sequence[float] | np.ndarray,
            dataset_id: str | None = None,
            fit_timestamp: str | None = None) -> RegressionModel:
    """Least-squares fit via pivoted QR.

    Requires a full-column-rank design with at least as many rows as
    columns; raises RankDeficiencyError otherwise. The returned residuals
    are orthogonal to every design column up to floating-point error.
    """
    values = X.values
    y = np.asarray(y, dtype=float)
    n, p = values.shape
    if y.shape != (n,):
        raise ValueError(f"y has length {y.shape}, expected ({n},)")
    if n < p:
        raise ValueError(f"need at least {p} rows to fit {p} columns, got {n}")
    if not np.all(np.isfinite(values)):
        raise ValueError("design matrix contains non-finite entries")
    if not np.all(np.isfinite(y)):
        raise ValueError("ratings vector contains non-finite entries")

    q, r, perm = scipy.linalg.qr(values, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    tol = max(n, p) * np.finfo(float).eps * (diag[0] if diag.size else 0.0)
    rank = int(np.sum(diag > tol))
    if rank < p:
        names = X.column_names
        dependent = [names[j] for j in perm[rank:]]
        raise RankDeficiencyError(dependent, rank, p)
    beta = np.empty(p)
    beta[perm] = scipy.linalg.solve_triangular(r, q.T @ y)

    residuals = y - values @ beta
    rss = float(residuals @ residuals)
    tss = float(np.sum((y - y.mean()) ** 2))
    r_squared = 1.0 if tss == 0.0 else 1.0 - rss / tss
    return RegressionModel(
        labels=X.labels,
        intercept=float(beta[0]),
        coefficients=tuple(float(b) for b in beta[1:]),
        rss=rss,
        r_squared=r_squared,
        n_rows=n,
        dataset_id=dataset_id,
        fit_timestamp=fit_timestamp,
    )


def predict(model: RegressionModel,
            features: FeatureVector | Mapping[str, float]) -> float:
    """intercept + sum(coefficient * feature); raises if a regressor is missing."""
    values = features.regressors() if isinstance(features, FeatureVector) else features
    total = model.intercept
    for label, coef in zip(model.labels, model.coefficients):
        if label not in values or values[label] is None:
            raise MissingRegressorError(f"features are missing regressor {label!r}")
        total += coef * values[label]
    return total


def predict_design(model: RegressionModel, X: DesignMatrix) -> np.ndarray:
    """Vectorized prediction; the design's labels must match the model's."""
    if X.labels != model.labels:
        raise MissingRegressorError(
            f"design labels {X.labels} do not match model labels {model.labels}")
    beta = np.concatenate(([model.intercept], model.coefficients))
    return X.values @ beta


def save_model(path: str | Path, model: RegressionModel,
               config_hash: str | None = None) -> None:
    obj = model.to_json()
    if config_hash is not None:
        obj["config_hash"] = config_hash
    Path(path).write_text(json.dumps(obj, indent=2) + "\n", encoding="utf-8")


def load_model(path: str | Path) -> RegressionModel:
    return RegressionModel.from_json(json.loads(Path(path).read_text(encoding="utf-8")))
