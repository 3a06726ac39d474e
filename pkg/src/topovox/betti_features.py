"""Betti-curve feature vectors.

A persistence diagram becomes a fixed 300-component vector: for each of the
100 uniform thresholds over [0, 255], the number of classes alive per
dimension, counting birth <= t < death. Columns are named b0_000 .. b2_099
and that order is the on-disk contract.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .cubical import build_filtration
from .errors import FormatError, MissingClassError, ShapeError
from .homology import PersistenceDiagram, betti_curve_from_diagram, compute_persistence
from .volume_io import VALID_LABELS, Volume3D, normalize

N_THRESHOLDS = 100
N_FEATURES = 3 * N_THRESHOLDS


def threshold_grid() -> np.ndarray:
    """The canonical grid: 100 uniform thresholds spanning [0, 255]."""
    return np.linspace(0.0, 255.0, N_THRESHOLDS)


def feature_names() -> list[str]:
    return [f"b{k}_{i:03d}" for k in range(3) for i in range(N_THRESHOLDS)]


@dataclass(frozen=True)
class BettiFeatureVector:
    """300 alive-class counts: dimensions 0..2, 100 thresholds each."""

    values: np.ndarray

    def __post_init__(self):
        arr = np.ascontiguousarray(self.values, dtype=np.float64)
        if arr.shape != (N_FEATURES,):
            raise ShapeError(f"feature vector must have {N_FEATURES} components, got {arr.shape}")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    def dim_slice(self, dim: int) -> np.ndarray:
        if dim not in (0, 1, 2):
            raise ShapeError(f"dimension {dim} out of range")
        return self.values[dim * N_THRESHOLDS : (dim + 1) * N_THRESHOLDS]


def betti_curve(diagram: PersistenceDiagram, dim: int, thresholds: np.ndarray | None = None) -> np.ndarray:
    """Alive-class counts per threshold for one dimension."""
    if dim not in (0, 1, 2):
        raise ShapeError(f"dimension {dim} out of range")
    if thresholds is None:
        thresholds = threshold_grid()
    return betti_curve_from_diagram(diagram, thresholds)[:, dim]


def featurize_diagram(diagram: PersistenceDiagram) -> BettiFeatureVector:
    table = betti_curve_from_diagram(diagram, threshold_grid())
    return BettiFeatureVector(values=table.T.reshape(-1).astype(np.float64))


def featurize(volume: Volume3D) -> BettiFeatureVector:
    """Volume to 300-vector: normalize, filter, compute persistence, count."""
    diagram = compute_persistence(build_filtration(normalize(volume)))
    return featurize_diagram(diagram)


def _format_value(v: float) -> str:
    return str(int(v)) if float(v).is_integer() else repr(float(v))


def write_features_csv(labels: list[str], vectors: list[BettiFeatureVector], path: Path | str):
    """label,b0_000..b2_099 rows, one per volume, in the order given."""
    if len(labels) != len(vectors):
        raise ShapeError(f"{len(labels)} labels for {len(vectors)} vectors")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["label"] + feature_names())
        for label, vec in zip(labels, vectors):
            writer.writerow([label] + [_format_value(v) for v in vec.values])


def read_features_csv(path: Path | str) -> tuple[list[str], np.ndarray]:
    """Returns labels and the (n, 300) feature matrix."""
    expected = ["label"] + feature_names()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != expected:
            raise FormatError(f"{path}: unexpected feature CSV header")
        labels = []
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != N_FEATURES + 1:
                raise FormatError(f"{path}:{lineno}: expected {N_FEATURES + 1} columns, got {len(row)}")
            labels.append(row[0])
            rows.append([float(x) for x in row[1:]])
    X = np.asarray(rows, dtype=np.float64).reshape(len(labels), N_FEATURES)
    return labels, X


def summarize_curves(
    labels: list[str],
    X: np.ndarray,
    classes: tuple[str, ...] = VALID_LABELS,
    band: float = 0.4,
) -> list[dict]:
    """Per class, dimension, and threshold: median and a central band.

    With the default band of 0.4 the band edges are the 30th and 70th
    percentiles. Returns rows with keys dim, t_index, t_value, class,
    lower, median, upper.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != N_FEATURES:
        raise ShapeError(f"expected an (n, {N_FEATURES}) matrix, got {X.shape}")
    if len(labels) != X.shape[0]:
        raise ShapeError(f"{len(labels)} labels for {X.shape[0]} rows")
    if not 0.0 < band < 1.0:
        raise ShapeError(f"band must be in (0, 1), got {band}")
    grid = threshold_grid()
    lo_q = 100.0 * (1.0 - band) / 2.0
    hi_q = 100.0 - lo_q
    label_arr = np.asarray(labels)
    rows = []
    for cls in classes:
        mask = label_arr == cls
        if not mask.any():
            raise MissingClassError(f"no rows labeled {cls!r}")
        sub = X[mask]
        for k in range(3):
            block = sub[:, k * N_THRESHOLDS : (k + 1) * N_THRESHOLDS]
            lower = np.percentile(block, lo_q, axis=0)
            median = np.percentile(block, 50.0, axis=0)
            upper = np.percentile(block, hi_q, axis=0)
            for i in range(N_THRESHOLDS):
                rows.append(
                    {
                        "dim": k,
                        "t_index": i,
                        "t_value": float(grid[i]),
                        "class": cls,
                        "lower": float(lower[i]),
                        "median": float(median[i]),
                        "upper": float(upper[i]),
                    }
                )
    return rows


def write_curves_csv(rows: list[dict], path: Path | str):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["dim", "t_index", "t_value", "class", "lower", "median", "upper"])
        for r in rows:
            writer.writerow(
                [
                    r["dim"],
                    r["t_index"],
                    repr(r["t_value"]),
                    r["class"],
                    _format_value(r["lower"]),
                    _format_value(r["median"]),
                    _format_value(r["upper"]),
                ]
            )
