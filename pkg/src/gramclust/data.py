"""Feature matrices, preprocessing, and the normalized left Gram matrix.

The similarity on which everything downstream operates is the N x N matrix
G = X X^T / P computed from a column-standardized N x P feature matrix X.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import (
    AllColumnsConstantError,
    DataError,
    NonFiniteInputError,
    NotStandardizedError,
)

# Columns whose sample standard deviation falls below this are treated as
# constant and dropped.
CONSTANT_SD_TOL = 1e-12

STANDARD_MEAN_TOL = 1e-10
STANDARD_SD_TOL = 1e-8
SYMMETRY_TOL = 1e-12


def _as_matrix(values) -> np.ndarray:
    a = np.array(values, dtype=np.float64, order="C")
    if a.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got ndim={a.ndim}")
    if not np.all(np.isfinite(a)):
        raise NonFiniteInputError("matrix contains NaN or infinite entries")
    return a


@dataclass(frozen=True)
class FeatureMatrix:
    """N x P matrix of feature measurements (rows = objects).

    Instances are immutable: the backing array is copied on construction
    and marked read-only, so a FeatureMatrix can be shared across threads.

    Attributes
    ----------
    values : ndarray, shape (N, P)
    standardized : bool
        True only if every column has mean 0 and sample sd 1 (ddof=1).
    log_applied : bool
        Set by preprocess_dataset when the all-positive log step fired.
    n_dropped_columns : int
        Constant columns removed by the transformation that produced this
        matrix (0 for raw data).
    """

    values: np.ndarray
    standardized: bool = False
    log_applied: bool = False
    n_dropped_columns: int = 0

    def __post_init__(self):
        a = _as_matrix(self.values)
        n, p = a.shape
        if n < 2:
            raise ValueError(f"need at least 2 objects, got N={n}")
        if p < 1:
            raise ValueError("need at least 1 feature")
        if self.standardized:
            means = a.mean(axis=0)
            sds = a.std(axis=0, ddof=1)
            if np.max(np.abs(means)) >= STANDARD_MEAN_TOL:
                raise ValueError("standardized flag set but a column mean exceeds 1e-10")
            if np.max(np.abs(sds - 1.0)) >= STANDARD_SD_TOL:
                raise ValueError("standardized flag set but a column sd deviates from 1")
        a.setflags(write=False)
        object.__setattr__(self, "values", a)

    @property
    def n_objects(self) -> int:
        return self.values.shape[0]

    @property
    def n_features(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class GramMatrix:
    """N x N normalized left Gram matrix, symmetric by construction."""

    values: np.ndarray

    def __post_init__(self):
        a = _as_matrix(self.values)
        if a.shape[0] != a.shape[1]:
            raise ValueError(f"Gram matrix must be square, got {a.shape}")
        if np.max(np.abs(a - a.T)) >= SYMMETRY_TOL:
            raise ValueError("Gram matrix is not symmetric within 1e-12")
        a.setflags(write=False)
        object.__setattr__(self, "values", a)

    @property
    def n_objects(self) -> int:
        return self.values.shape[0]


def standardize_columns(x: FeatureMatrix) -> FeatureMatrix:
    """Scale every column to mean 0 and sample sd 1 (denominator N-1).

    Constant columns (sample sd below 1e-12) are dropped; the count shows
    up in ``n_dropped_columns`` of the result. Idempotent within 1e-10.
    """
    a = x.values
    sds = a.std(axis=0, ddof=1)
    keep = sds >= CONSTANT_SD_TOL
    if not keep.any():
        raise AllColumnsConstantError("every column has zero sample sd")
    kept = a[:, keep]
    out = (kept - kept.mean(axis=0)) / kept.std(axis=0, ddof=1)
    return FeatureMatrix(
        out,
        standardized=True,
        log_applied=x.log_applied,
        n_dropped_columns=int((~keep).sum()),
    )


def preprocess_dataset(x: FeatureMatrix) -> FeatureMatrix:
    """Apply the benchmark preprocessing to a raw feature matrix.

    If every entry is strictly positive, take the natural log elementwise;
    then center each column on its median and scale by its sample sd.
    Constant columns are dropped. The result is *not* standardized in the
    mean-0 sense (centering uses the median); run standardize_columns
    afterwards before computing the Gram matrix.
    """
    if x.standardized:
        raise ValueError("preprocess_dataset expects raw (unstandardized) input")
    a = x.values
    log_applied = bool(np.all(a > 0.0))
    if log_applied:
        a = np.log(a)
    sds = a.std(axis=0, ddof=1)
    keep = sds >= CONSTANT_SD_TOL
    if not keep.any():
        raise AllColumnsConstantError("every column has zero sample sd")
    kept = a[:, keep]
    out = (kept - np.median(kept, axis=0)) / kept.std(axis=0, ddof=1)
    return FeatureMatrix(
        out,
        standardized=False,
        log_applied=log_applied,
        n_dropped_columns=int((~keep).sum()),
    )


def gram_values(values: np.ndarray) -> np.ndarray:
    """Raw kernel: V V^T / P, symmetrized to guard downstream invariants."""
    v = np.asarray(values, dtype=np.float64)
    g = v @ v.T / v.shape[1]
    return (g + g.T) / 2.0


def gram(x: FeatureMatrix) -> GramMatrix:
    """G = X X^T / P for a standardized feature matrix.

    Raises NotStandardizedError when the flag is unset: the algorithm's
    zero-column-sum invariants depend on standardization.
    """
    if not x.standardized:
        raise NotStandardizedError("gram requires a column-standardized FeatureMatrix")
    return GramMatrix(gram_values(x.values))


# ---------------------------------------------------------------------------
# CSV ingestion (rows = objects, columns = features, optional header row,
# optional "label" column carrying ground truth that is never clustered on)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FeatureCsv:
    """Parsed feature CSV: matrix plus optional extracted truth labels."""

    matrix: FeatureMatrix
    truth_labels: Optional[list] = None
    feature_names: Optional[list] = field(default=None)


def _looks_numeric(tokens) -> bool:
    for t in tokens:
        try:
            float(t)
        except ValueError:
            return False
    return True


def read_feature_csv(path, delimiter: str = ",") -> FeatureCsv:
    """Read a feature CSV into a raw FeatureMatrix.

    The header row is detected by attempting to parse the first row as
    numbers. A header column named ``label`` (case-insensitive) is
    extracted as ground truth and excluded from the features. Ragged rows
    raise DataError with the offending 1-based line number.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        rows = [(lineno, row) for lineno, row in enumerate(reader, start=1) if row]
    if not rows:
        raise DataError("empty file")

    first = [t.strip() for t in rows[0][1]]
    has_header = not _looks_numeric(first)
    names = first if has_header else None
    data_rows = rows[1:] if has_header else rows
    if not data_rows:
        raise DataError("no data rows", line=rows[0][0])

    label_idx = None
    if names is not None:
        for i, name in enumerate(names):
            if name.lower() == "label":
                label_idx = i
                break

    width = len(rows[0][1])
    values = []
    labels = [] if label_idx is not None else None
    for lineno, row in data_rows:
        if len(row) != width:
            raise DataError(
                f"expected {width} fields, got {len(row)}", line=lineno
            )
        try:
            parsed = [
                float(tok) for i, tok in enumerate(row) if i != label_idx
            ]
        except ValueError as exc:
            raise DataError(f"non-numeric value ({exc})", line=lineno) from exc
        values.append(parsed)
        if labels is not None:
            labels.append(row[label_idx].strip())

    feature_names = None
    if names is not None:
        feature_names = [n for i, n in enumerate(names) if i != label_idx]
    return FeatureCsv(
        matrix=FeatureMatrix(np.asarray(values, dtype=np.float64)),
        truth_labels=labels,
        feature_names=feature_names,
    )
