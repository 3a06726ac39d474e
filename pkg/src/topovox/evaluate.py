"""Stratified splitting and classification metrics.

Labels are binary: 0 = LGG, 1 = HGG. Precision, recall, and F1 are
support-weighted averages over the two classes, which on a binary problem
makes weighted recall coincide with accuracy. AUC is the Mann-Whitney rank
statistic of the positive-class scores, ties counting one half.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    FormatError,
    InsufficientDataError,
    OutOfRangeError,
    ShapeError,
    UndefinedMetricError,
)
from .volume_io import VALID_LABELS

MIN_CLASS_SIZE = 5
TEST_FRACTION = 0.2


def encode_labels(labels) -> np.ndarray:
    """LGG/HGG strings to 0/1 ints; 0/1 sequences pass through."""
    arr = np.asarray(labels)
    if arr.dtype.kind in ("i", "u", "b", "f"):
        out = arr.astype(np.int64)
        if not np.isin(out, (0, 1)).all() or not np.all(out == arr):
            raise FormatError("numeric labels must be 0 or 1")
        return out
    out = np.empty(len(arr), dtype=np.int64)
    for i, lab in enumerate(arr):
        if lab not in VALID_LABELS:
            raise FormatError(f"unknown label {lab!r}, expected one of {VALID_LABELS}")
        out[i] = VALID_LABELS.index(lab)
    return out


def split_80_20(labels, seed: int = 0):
    """Stratified split; returns sorted (train_indices, test_indices).

    Per class the test share is round(0.2 * n), so proportions are kept to
    within one sample.
    """
    if hasattr(labels, "labels"):
        labels = labels.labels()
    y = encode_labels(labels)
    rng = np.random.default_rng(seed)
    test_parts = []
    train_parts = []
    for cls in (0, 1):
        members = np.flatnonzero(y == cls)
        if len(members) < MIN_CLASS_SIZE:
            raise InsufficientDataError(
                f"class {VALID_LABELS[cls]} has {len(members)} samples, need >= {MIN_CLASS_SIZE}"
            )
        k = int(TEST_FRACTION * len(members) + 0.5)
        perm = rng.permutation(members)
        test_parts.append(perm[:k])
        train_parts.append(perm[k:])
    train = np.sort(np.concatenate(train_parts))
    test = np.sort(np.concatenate(test_parts))
    return train, test


def stratified_kfold(labels, k: int, seed: int = 0):
    """K stratified folds; returns a list of (train_indices, test_indices).

    Each class is shuffled once and dealt round-robin, so per-class fold
    sizes differ by at most one. Indices come back sorted.
    """
    if hasattr(labels, "labels"):
        labels = labels.labels()
    y = encode_labels(labels)
    if k < 2:
        raise OutOfRangeError(f"need at least 2 folds, got {k}")
    rng = np.random.default_rng(seed)
    folds: list[list[int]] = [[] for _ in range(k)]
    for cls in (0, 1):
        members = np.flatnonzero(y == cls)
        if len(members) < k:
            raise InsufficientDataError(
                f"class {VALID_LABELS[cls]} has {len(members)} samples, need >= {k} for {k} folds"
            )
        for i, idx in enumerate(rng.permutation(members)):
            folds[i % k].append(int(idx))
    everything = np.arange(len(y), dtype=np.int64)
    out = []
    for part in folds:
        test = np.sort(np.asarray(part, dtype=np.int64))
        out.append((np.setdiff1d(everything, test), test))
    return out


def rank_auc(y_true, scores) -> float:
    """U / (n+ * n-) with average ranks for tied scores."""
    y = np.asarray(y_true, dtype=np.int64)
    s = np.asarray(scores, dtype=np.float64)
    if y.shape != s.shape:
        raise ShapeError(f"{y.shape} labels vs {s.shape} scores")
    n_pos = int((y == 1).sum())
    n_neg = int((y == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("AUC needs both classes in y_true")
    order = np.argsort(s, kind="stable")
    ranks = np.empty(len(s), dtype=np.float64)
    i = 0
    while i < len(s):
        j = i
        while j + 1 < len(s) and s[order[j + 1]] == s[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    u = float(ranks[y == 1].sum()) - n_pos * (n_pos + 1) / 2.0
    return u / (n_pos * n_neg)


@dataclass(frozen=True)
class EvalReport:
    accuracy: float
    precision: float
    recall: float
    f1: float
    auc: float | None
    confusion: np.ndarray
    per_class_precision: tuple[float, float]
    per_class_recall: tuple[float, float]
    n_test: int
    seed: int
    feature_set: str


def confusion_matrix(y_true, y_pred) -> np.ndarray:
    y = np.asarray(y_true, dtype=np.int64)
    p = np.asarray(y_pred, dtype=np.int64)
    m = np.zeros((2, 2), dtype=np.int64)
    for t, q in ((0, 0), (0, 1), (1, 0), (1, 1)):
        m[t, q] = int(((y == t) & (p == q)).sum())
    return m


def compute_metrics(y_true, y_pred, scores, seed: int = 0, feature_set: str = "") -> EvalReport:
    """Weighted metrics over both classes; AUC is None on single-class truth."""
    y = np.asarray(y_true, dtype=np.int64)
    p = np.asarray(y_pred, dtype=np.int64)
    s = np.asarray(scores, dtype=np.float64)
    if not (y.shape == p.shape == s.shape) or y.ndim != 1 or len(y) == 0:
        raise ShapeError(f"shapes differ or empty: {y.shape}, {p.shape}, {s.shape}")
    for name, arr in (("y_true", y), ("y_pred", p)):
        if not np.isin(arr, (0, 1)).all():
            raise OutOfRangeError(f"{name} must be 0/1")
    if s.min() < 0.0 or s.max() > 1.0:
        raise OutOfRangeError(f"scores must lie in [0, 1], got [{s.min()}, {s.max()}]")
    n = len(y)
    m = confusion_matrix(y, p)
    accuracy = float(np.trace(m)) / n
    prec = []
    rec = []
    f1s = []
    for cls in (0, 1):
        tp = float(m[cls, cls])
        predicted = float(m[:, cls].sum())
        support = float(m[cls, :].sum())
        pc = tp / predicted if predicted > 0 else 0.0
        rc = tp / support if support > 0 else 0.0
        fc = 2.0 * pc * rc / (pc + rc) if (pc + rc) > 0 else 0.0
        prec.append(pc)
        rec.append(rc)
        f1s.append(fc)
    weights = np.array([m[0, :].sum() / n, m[1, :].sum() / n])
    try:
        auc = rank_auc(y, s)
    except UndefinedMetricError:
        auc = None
    return EvalReport(
        accuracy=accuracy,
        precision=float(weights @ prec),
        recall=float(weights @ rec),
        f1=float(weights @ f1s),
        auc=auc,
        confusion=m,
        per_class_precision=(prec[0], prec[1]),
        per_class_recall=(rec[0], rec[1]),
        n_test=n,
        seed=seed,
        feature_set=feature_set,
    )


def report_lines(report: EvalReport) -> list[str]:
    """Human-readable summary used by the CLI and the report file header."""
    auc_text = "undefined" if report.auc is None else f"{report.auc:.4f}"
    lines = [
        f"feature set : {report.feature_set or '(unnamed)'}",
        f"test size   : {report.n_test}   (split seed {report.seed})",
        f"accuracy    : {report.accuracy:.4f}",
        f"precision   : {report.precision:.4f}  (LGG {report.per_class_precision[0]:.4f}, HGG {report.per_class_precision[1]:.4f})",
        f"recall      : {report.recall:.4f}  (LGG {report.per_class_recall[0]:.4f}, HGG {report.per_class_recall[1]:.4f})",
        f"f1          : {report.f1:.4f}",
        f"auc         : {auc_text}",
        "confusion (rows true LGG,HGG; cols pred LGG,HGG):",
        f"  {report.confusion[0, 0]:6d} {report.confusion[0, 1]:6d}",
        f"  {report.confusion[1, 0]:6d} {report.confusion[1, 1]:6d}",
    ]
    return lines


def write_report(report: EvalReport, path: Path | str):
    """Flat key = value file, exact float reprs, one metric per line."""
    auc_text = "undefined" if report.auc is None else repr(report.auc)
    lines = [
        f"feature_set = {report.feature_set}",
        f"seed = {report.seed}",
        f"n_test = {report.n_test}",
        f"accuracy = {report.accuracy!r}",
        f"precision = {report.precision!r}",
        f"recall = {report.recall!r}",
        f"f1 = {report.f1!r}",
        f"auc = {auc_text}",
        f"precision_lgg = {report.per_class_precision[0]!r}",
        f"precision_hgg = {report.per_class_precision[1]!r}",
        f"recall_lgg = {report.per_class_recall[0]!r}",
        f"recall_hgg = {report.per_class_recall[1]!r}",
        f"confusion_true_lgg_pred_lgg = {report.confusion[0, 0]}",
        f"confusion_true_lgg_pred_hgg = {report.confusion[0, 1]}",
        f"confusion_true_hgg_pred_lgg = {report.confusion[1, 0]}",
        f"confusion_true_hgg_pred_hgg = {report.confusion[1, 1]}",
    ]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_confusion_csv(report: EvalReport, path: Path | str):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["true_class", "pred_LGG", "pred_HGG"])
        writer.writerow(["LGG", int(report.confusion[0, 0]), int(report.confusion[0, 1])])
        writer.writerow(["HGG", int(report.confusion[1, 0]), int(report.confusion[1, 1])])
