"""From-scratch tree ensembles, feature selection, and PCA.

Two learners over binary labels (0 = LGG, 1 = HGG): a random forest with
entropy splits, and Newton-boosted regression trees on the logistic loss.
Both are deterministic given their seed, expose normalized impurity-based
feature importance, and persist to a small binary container.

Split thresholds are midpoints between consecutive distinct values, but the
partition itself is positional in the sorted order, so tree structure depends
only on sample ordering. That is what makes training invariant to positive
rescaling of a feature column.
"""
from __future__ import annotations

import json
import math
import struct
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .errors import (
    DegenerateCovarianceError,
    DegenerateLabelsError,
    EmptySelectionError,
    FormatError,
    InsufficientDataError,
    InternalInvariantError,
    InvalidDataError,
    OutOfRangeError,
    ShapeError,
    TruncationError,
)

MODEL_MAGIC = b"CBT1"

# Gains are computed in floating point; anything at or below this floor is
# treated as zero so that mathematically gainless splits are never taken.
_GAIN_EPS = 1e-12

PCA_TOL = 1e-9
PCA_MAX_ITER = 10_000


# ---------------------------------------------------------------------------
# parameters

@dataclass(frozen=True)
class ForestParams:
    n_estimators: int = 300
    criterion: str = "entropy"
    min_samples_split: int = 10
    max_depth: int | None = None
    max_features: str = "sqrt"
    random_state: int = 0
    balance_classes: bool = False

    def __post_init__(self):
        if self.n_estimators < 1:
            raise OutOfRangeError(f"n_estimators must be >= 1, got {self.n_estimators}")
        if self.criterion != "entropy":
            raise OutOfRangeError(f"unsupported criterion {self.criterion!r}")
        if self.min_samples_split < 2:
            raise OutOfRangeError(f"min_samples_split must be >= 2, got {self.min_samples_split}")
        if self.max_depth is not None and self.max_depth < 1:
            raise OutOfRangeError(f"max_depth must be >= 1 or none, got {self.max_depth}")
        if self.max_features not in ("sqrt", "all"):
            raise OutOfRangeError(f"max_features must be 'sqrt' or 'all', got {self.max_features!r}")


@dataclass(frozen=True)
class BoostedParams:
    n_estimators: int = 1000
    max_depth: int = 25
    learning_rate: float = 0.1
    colsample_bytree: float = 0.4
    colsample_bylevel: float = 0.4
    reg_lambda: float = 1.0
    gamma: float = 0.0
    random_state: int = 0
    balance_classes: bool = False

    def __post_init__(self):
        if self.n_estimators < 1:
            raise OutOfRangeError(f"n_estimators must be >= 1, got {self.n_estimators}")
        if self.max_depth < 1:
            raise OutOfRangeError(f"max_depth must be >= 1, got {self.max_depth}")
        if not self.learning_rate > 0.0:
            raise OutOfRangeError(f"learning_rate must be > 0, got {self.learning_rate}")
        for name in ("colsample_bytree", "colsample_bylevel"):
            rate = getattr(self, name)
            if not 0.0 < rate <= 1.0:
                raise OutOfRangeError(f"{name} must be in (0, 1], got {rate}")
        if self.reg_lambda < 0.0 or self.gamma < 0.0:
            raise OutOfRangeError("reg_lambda and gamma must be >= 0")


# ---------------------------------------------------------------------------
# trees

@dataclass(frozen=True)
class DecisionTree:
    """Flat node arrays; feature == -1 marks a leaf.

    `value` holds the leaf payload: P(class 1) for forest trees, an additive
    weight for boosted trees. Internal slots of `value` are zero.
    """

    criterion: str
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def n_internal(self) -> int:
        return int(np.count_nonzero(self.feature >= 0))

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf payload for each row of X."""
        out = np.empty(len(X), dtype=np.float64)
        feat, thr, lft, rgt, val = self.feature, self.threshold, self.left, self.right, self.value
        for i in range(len(X)):
            row = X[i]
            node = 0
            while feat[node] >= 0:
                node = lft[node] if row[feat[node]] <= thr[node] else rgt[node]
            out[i] = val[node]
        return out


def _finish_tree(criterion, feature, threshold, left, right, value) -> DecisionTree:
    arrays = (
        np.asarray(feature, dtype=np.int32),
        np.asarray(threshold, dtype=np.float64),
        np.asarray(left, dtype=np.int32),
        np.asarray(right, dtype=np.int32),
        np.asarray(value, dtype=np.float64),
    )
    for a in arrays:
        a.setflags(write=False)
    return DecisionTree(criterion, *arrays)


def _entropy_vec(w1: np.ndarray, w: np.ndarray) -> np.ndarray:
    p = w1 / w
    out = np.zeros_like(p)
    m = (p > 0.0) & (p < 1.0)
    pm = p[m]
    qm = 1.0 - pm
    out[m] = -(pm * np.log2(pm) + qm * np.log2(qm))
    return out


def _entropy_scalar(p: float) -> float:
    if p <= 0.0 or p >= 1.0:
        return 0.0
    return float(-(p * math.log2(p) + (1.0 - p) * math.log2(1.0 - p)))


def _best_entropy_split(X, idx, feats, hp, W, W1, wv, wy):
    """Highest information-gain (feature, position) over the given columns.

    Ties keep the earliest feature and the lowest split position. Returns
    None when no column admits a split with gain above the floor.
    """
    best = None
    for f in feats:
        xs = X[idx, f]
        order = np.argsort(xs, kind="stable")
        xv = xs[order]
        ok = xv[:-1] < xv[1:]
        if not ok.any():
            continue
        cw = np.cumsum(wv[order])[:-1]
        cw1 = np.cumsum(wy[order])[:-1]
        hl = _entropy_vec(cw1, cw)
        hr = _entropy_vec(W1 - cw1, W - cw)
        gains = hp - (cw * hl + (W - cw) * hr) / W
        gains[~ok] = -np.inf
        pos = int(np.argmax(gains))
        g = float(gains[pos])
        if g > _GAIN_EPS and (best is None or g > best[0]):
            best = (g, int(f), pos, order)
    return best


def _grow_forest_tree(X, y, w, boot, rng, params, d):
    feature, threshold, left, right, value = [], [], [], [], []
    imp = np.zeros(d)
    W_root = float(w[boot].sum())
    k = d if params.max_features == "all" else max(1, math.isqrt(d))

    def new_node() -> int:
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(0.0)
        return len(feature) - 1

    def grow(idx: np.ndarray, depth: int) -> int:
        node = new_node()
        wv = w[idx]
        wy = wv * y[idx]
        W = float(wv.sum())
        W1 = float(wy.sum())
        p1 = W1 / W
        hp = _entropy_scalar(p1)
        best = None
        depth_ok = params.max_depth is None or depth < params.max_depth
        if len(idx) >= params.min_samples_split and hp > 0.0 and depth_ok:
            feats = np.arange(d) if k >= d else np.sort(rng.choice(d, size=k, replace=False))
            best = _best_entropy_split(X, idx, feats, hp, W, W1, wv, wy)
        if best is None:
            value[node] = p1
            return node
        gain, f, pos, order = best
        imp[f] += (W / W_root) * gain
        xv = X[idx[order], f]
        feature[node] = f
        threshold[node] = float((xv[pos] + xv[pos + 1]) / 2.0)
        left[node] = grow(idx[order[: pos + 1]], depth + 1)
        right[node] = grow(idx[order[pos + 1 :]], depth + 1)
        return node

    grow(boot, 0)
    return _finish_tree("entropy", feature, threshold, left, right, value), imp


# ---------------------------------------------------------------------------
# random forest

@dataclass(frozen=True)
class Forest:
    trees: tuple[DecisionTree, ...]
    importance: np.ndarray
    params: ForestParams
    n_features: int


def _validate_xy(X, y):
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] < 1:
        raise ShapeError(f"feature matrix must be 2-D, got shape {X.shape}")
    y = np.asarray(y)
    if y.shape != (X.shape[0],):
        raise ShapeError(f"{len(y)} labels for {X.shape[0]} samples")
    if X.shape[0] < 2:
        raise InsufficientDataError(f"need >= 2 samples, got {X.shape[0]}")
    if not np.isfinite(X).all():
        raise InvalidDataError("feature matrix contains non-finite values")
    y = y.astype(np.float64)
    uniq = np.unique(y)
    if not np.isin(uniq, (0.0, 1.0)).all():
        raise DegenerateLabelsError(f"labels must be 0 or 1, got {uniq.tolist()}")
    if len(uniq) < 2:
        raise DegenerateLabelsError("training data contains a single class")
    return X, y


def _sample_weights(y: np.ndarray, balance: bool) -> np.ndarray:
    if not balance:
        return np.ones(len(y))
    n = len(y)
    n1 = float(y.sum())
    w = np.where(y == 1.0, n / (2.0 * n1), n / (2.0 * (n - n1)))
    return w


def train_forest(X, y, params: ForestParams | None = None) -> Forest:
    if params is None:
        params = ForestParams()
    X, y = _validate_xy(X, y)
    n, d = X.shape
    w = _sample_weights(y, params.balance_classes)
    raw_imp = np.zeros(d)
    trees = []
    for seed in np.random.SeedSequence(params.random_state).spawn(params.n_estimators):
        rng = np.random.default_rng(seed)
        boot = rng.integers(0, n, size=n)
        tree, imp = _grow_forest_tree(X, y, w, boot, rng, params, d)
        trees.append(tree)
        raw_imp += imp
    total = raw_imp.sum()
    importance = raw_imp / total if total > 0.0 else raw_imp
    importance.setflags(write=False)
    return Forest(trees=tuple(trees), importance=importance, params=params, n_features=d)


def _as_matrix(X, d):
    arr = np.ascontiguousarray(X, dtype=np.float64)
    single = arr.ndim == 1
    if single:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != d:
        raise ShapeError(f"expected {d} features, got shape {np.shape(X)}")
    return arr, single


def predict_forest(model: Forest, X):
    """Mean positive-class leaf probability; label 1 at score >= 0.5."""
    arr, single = _as_matrix(X, model.n_features)
    scores = np.zeros(len(arr))
    for tree in model.trees:
        scores += tree.apply(arr)
    scores /= len(model.trees)
    labels = (scores >= 0.5).astype(np.int64)
    if single:
        return int(labels[0]), float(scores[0])
    return labels, scores


# ---------------------------------------------------------------------------
# newton-boosted trees

@dataclass(frozen=True)
class BoostedModel:
    trees: tuple[DecisionTree, ...]
    base_score: float
    importance: np.ndarray
    params: BoostedParams
    n_features: int
    loss_history: tuple[float, ...]


def _sigmoid(m: np.ndarray) -> np.ndarray:
    out = np.empty_like(m)
    pos = m >= 0.0
    out[pos] = 1.0 / (1.0 + np.exp(-m[pos]))
    em = np.exp(m[~pos])
    out[~pos] = em / (1.0 + em)
    return out


def _logloss(y, p, w):
    p = np.clip(p, 1e-15, 1.0 - 1e-15)
    per = -(y * np.log(p) + (1.0 - y) * np.log(1.0 - p))
    return float((w * per).sum() / w.sum())


def _best_newton_split(X, g, h, idx, cols, lam, gam):
    G = float(g[idx].sum())
    H = float(h[idx].sum())
    parent = G * G / (H + lam)
    best = None
    for f in cols:
        xs = X[idx, f]
        order = np.argsort(xs, kind="stable")
        xv = xs[order]
        ok = xv[:-1] < xv[1:]
        if not ok.any():
            continue
        cg = np.cumsum(g[idx][order])[:-1]
        ch = np.cumsum(h[idx][order])[:-1]
        gains = 0.5 * (cg**2 / (ch + lam) + (G - cg) ** 2 / (H - ch + lam) - parent) - gam
        gains[~ok] = -np.inf
        pos = int(np.argmax(gains))
        gval = float(gains[pos])
        if gval > _GAIN_EPS and (best is None or gval > best[0]):
            best = (gval, int(f), pos, order)
    return best


def _grow_boosted_tree(X, g, h, rng, params, d):
    """One Newton tree, grown level by level so column subsampling can be
    applied per tree and again per depth level."""
    feature, threshold, left, right, value = [], [], [], [], []
    imp = np.zeros(d)
    lam, gam = params.reg_lambda, params.gamma

    def new_node() -> int:
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(0.0)
        return len(feature) - 1

    def seal(node: int, idx: np.ndarray):
        value[node] = float(-g[idx].sum() / (h[idx].sum() + lam))

    kt = max(1, int(params.colsample_bytree * d + 0.5))
    tree_cols = np.arange(d) if kt >= d else np.sort(rng.choice(d, size=kt, replace=False))

    root = new_node()
    frontier = [(root, np.arange(X.shape[0]))]
    any_split = False
    for _depth in range(params.max_depth):
        if not frontier:
            break
        kl = max(1, int(params.colsample_bylevel * len(tree_cols) + 0.5))
        cols = tree_cols if kl >= len(tree_cols) else np.sort(rng.choice(tree_cols, size=kl, replace=False))
        nxt = []
        for node, idx in frontier:
            best = _best_newton_split(X, g, h, idx, cols, lam, gam)
            if best is None:
                seal(node, idx)
                continue
            gain, f, pos, order = best
            imp[f] += gain
            any_split = True
            xv = X[idx[order], f]
            feature[node] = f
            threshold[node] = float((xv[pos] + xv[pos + 1]) / 2.0)
            li, ri = new_node(), new_node()
            left[node], right[node] = li, ri
            nxt.append((li, idx[order[: pos + 1]]))
            nxt.append((ri, idx[order[pos + 1 :]]))
        frontier = nxt
    for node, idx in frontier:
        seal(node, idx)
    return _finish_tree("newton_gain", feature, threshold, left, right, value), imp, any_split


def train_boosted(X, y, params: BoostedParams | None = None) -> BoostedModel:
    """Newton boosting on the logistic loss: g = p - y, h = p(1 - p).

    Halts early, without appending the tree, on the first round where no
    candidate split clears the gain floor.
    """
    if params is None:
        params = BoostedParams()
    X, y = _validate_xy(X, y)
    n, d = X.shape
    w = _sample_weights(y, params.balance_classes)
    prior = float((w * y).sum() / w.sum())
    base = math.log(prior / (1.0 - prior))
    margin = np.full(n, base)
    raw_imp = np.zeros(d)
    losses = [_logloss(y, _sigmoid(margin), w)]
    trees = []
    for seed in np.random.SeedSequence(params.random_state).spawn(params.n_estimators):
        rng = np.random.default_rng(seed)
        p = _sigmoid(margin)
        g = (p - y) * w
        h = p * (1.0 - p) * w
        tree, imp, any_split = _grow_boosted_tree(X, g, h, rng, params, d)
        if not any_split:
            break
        trees.append(tree)
        raw_imp += imp
        margin += params.learning_rate * tree.apply(X)
        losses.append(_logloss(y, _sigmoid(margin), w))
    total = raw_imp.sum()
    importance = raw_imp / total if total > 0.0 else raw_imp
    importance.setflags(write=False)
    return BoostedModel(
        trees=tuple(trees),
        base_score=base,
        importance=importance,
        params=params,
        n_features=d,
        loss_history=tuple(losses),
    )


def predict_boosted(model: BoostedModel, X):
    arr, single = _as_matrix(X, model.n_features)
    margin = np.full(len(arr), model.base_score)
    for tree in model.trees:
        margin += model.params.learning_rate * tree.apply(arr)
    scores = _sigmoid(margin)
    labels = (scores >= 0.5).astype(np.int64)
    if single:
        return int(labels[0]), float(scores[0])
    return labels, scores


def predict(model, X):
    if isinstance(model, Forest):
        return predict_forest(model, X)
    if isinstance(model, BoostedModel):
        return predict_boosted(model, X)
    raise TypeError(f"not a trained model: {type(model).__name__}")


def feature_importance(model) -> np.ndarray:
    if not isinstance(model, (Forest, BoostedModel)):
        raise TypeError(f"not a trained model: {type(model).__name__}")
    return model.importance


# ---------------------------------------------------------------------------
# feature selection

@dataclass(frozen=True)
class SelectedFeatureSet:
    tau: float
    indices: np.ndarray
    provenance: str = "forest"

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        idx.setflags(write=False)
        object.__setattr__(self, "indices", idx)

    def __len__(self) -> int:
        return len(self.indices)


def select_features(importance, tau: float, provenance: str = "forest") -> SelectedFeatureSet:
    """S_tau = {j : I_j >= tau}."""
    imp = np.asarray(importance, dtype=np.float64)
    if imp.ndim != 1:
        raise ShapeError(f"importance must be 1-D, got shape {imp.shape}")
    if tau < 0.0:
        raise OutOfRangeError(f"tau must be >= 0, got {tau}")
    indices = np.flatnonzero(imp >= tau)
    if len(indices) == 0:
        raise EmptySelectionError(f"tau={tau} exceeds the largest importance {imp.max()}")
    return SelectedFeatureSet(tau=float(tau), indices=indices, provenance=provenance)


def sweep_tau(taus, importance, X_train, y_train, X_val, y_val, params=None) -> list[dict]:
    """Per-tau validation accuracy and retained-feature count.

    `params` picks the evaluation model (ForestParams or BoostedParams;
    forest defaults when omitted). Taus that empty the selection are
    reported with n_selected 0 and accuracy None rather than aborting.
    """
    X_train = np.ascontiguousarray(X_train, dtype=np.float64)
    X_val = np.ascontiguousarray(X_val, dtype=np.float64)
    y_val = np.asarray(y_val, dtype=np.int64)
    trainer = train_boosted if isinstance(params, BoostedParams) else train_forest
    records = []
    for tau in taus:
        try:
            sel = select_features(importance, tau)
        except EmptySelectionError:
            records.append({"tau": float(tau), "n_selected": 0, "accuracy": None})
            continue
        model = trainer(X_train[:, sel.indices], y_train, params)
        labels, _ = predict(model, X_val[:, sel.indices])
        acc = float(np.mean(labels == y_val))
        records.append({"tau": float(tau), "n_selected": len(sel), "accuracy": acc})
    return records


def best_tau(records) -> float:
    """Highest validation accuracy; ties go to the larger tau."""
    valid = [r for r in records if r["accuracy"] is not None]
    if not valid:
        raise EmptySelectionError("no tau in the sweep retained any features")
    return max(valid, key=lambda r: (r["accuracy"], r["tau"]))["tau"]


# ---------------------------------------------------------------------------
# pca

def _null_direction(comps: list[np.ndarray], d: int) -> np.ndarray:
    for j in range(d):
        e = np.zeros(d)
        e[j] = 1.0
        for c in comps:
            e -= (e @ c) * c
        nrm = float(np.linalg.norm(e))
        if nrm > 1e-8:
            return e / nrm
    raise InternalInvariantError("no direction orthogonal to the found components")


def pca_components(X, k: int):
    """Top-k covariance eigenpairs by the deflated power method.

    Returns (components (k, d), eigenvalues (k,), ratios (k,), mean (d,)).
    Eigenvalues below trace * 1e-12 are treated as exactly zero and their
    eigenvectors completed by Gram-Schmidt. The sign convention makes each
    eigenvector's largest-magnitude entry positive.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ShapeError(f"expected a 2-D matrix, got shape {X.shape}")
    n, d = X.shape
    if n < 2:
        raise InsufficientDataError(f"need >= 2 samples, got {n}")
    if not np.isfinite(X).all():
        raise InvalidDataError("matrix contains non-finite values")
    if not 1 <= k <= min(n - 1, d):
        raise OutOfRangeError(f"k must be in [1, {min(n - 1, d)}], got {k}")
    mean = X.mean(axis=0)
    Xc = X - mean
    C = (Xc.T @ Xc) / (n - 1)
    trace = float(np.trace(C))
    if trace <= 0.0:
        raise DegenerateCovarianceError("zero-variance data")
    zero_floor = trace * 1e-12
    rng = np.random.default_rng(0)
    C_defl = C.copy()
    comps: list[np.ndarray] = []
    eigvals = np.zeros(k)
    for i in range(k):
        v = rng.standard_normal(d)
        v /= np.linalg.norm(v)
        lam = 0.0
        for _ in range(PCA_MAX_ITER):
            wv = C_defl @ v
            nrm = float(np.linalg.norm(wv))
            if nrm <= zero_floor:
                lam = 0.0
                break
            wv /= nrm
            done = float(np.linalg.norm(wv - v)) < PCA_TOL
            v = wv
            lam = nrm
            if done:
                break
        if lam <= zero_floor:
            v = _null_direction(comps, d)
            lam = 0.0
        else:
            # keep the basis orthonormal despite finite-tolerance iteration
            for c in comps:
                v -= (v @ c) * c
            v /= np.linalg.norm(v)
            lam = float(v @ (C @ v))
            C_defl -= lam * np.outer(v, v)
        j = int(np.argmax(np.abs(v)))
        if v[j] < 0.0:
            v = -v
        comps.append(v)
        eigvals[i] = max(lam, 0.0)
    components = np.vstack(comps)
    ratios = eigvals / trace
    return components, eigvals, ratios, mean


def pca_project(X, k: int):
    """Center, project onto the top-k components, report variance ratios."""
    components, _, ratios, mean = pca_components(X, k)
    projected = (np.ascontiguousarray(X, dtype=np.float64) - mean) @ components.T
    return projected, ratios


# ---------------------------------------------------------------------------
# persistence and config

def _tree_to_dict(tree: DecisionTree) -> dict:
    return {
        "criterion": tree.criterion,
        "feature": tree.feature.tolist(),
        "threshold": tree.threshold.tolist(),
        "left": tree.left.tolist(),
        "right": tree.right.tolist(),
        "value": tree.value.tolist(),
    }


def _tree_from_dict(rec: dict) -> DecisionTree:
    try:
        return _finish_tree(
            rec["criterion"], rec["feature"], rec["threshold"], rec["left"], rec["right"], rec["value"]
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"malformed tree record: {exc}") from None


def dumps_model(model) -> bytes:
    if isinstance(model, Forest):
        payload = {
            "kind": "forest",
            "n_features": model.n_features,
            "params": asdict(model.params),
            "importance": model.importance.tolist(),
            "trees": [_tree_to_dict(t) for t in model.trees],
        }
    elif isinstance(model, BoostedModel):
        payload = {
            "kind": "boosted",
            "n_features": model.n_features,
            "params": asdict(model.params),
            "importance": model.importance.tolist(),
            "base_score": model.base_score,
            "loss_history": list(model.loss_history),
            "trees": [_tree_to_dict(t) for t in model.trees],
        }
    else:
        raise TypeError(f"not a trained model: {type(model).__name__}")
    body = json.dumps(payload, sort_keys=True, separators=(",", ":"), allow_nan=False).encode("utf-8")
    return MODEL_MAGIC + struct.pack(">Q", len(body)) + body


def loads_model(data: bytes):
    if len(data) < 12:
        raise TruncationError(f"container is {len(data)} bytes, header needs 12")
    if data[:4] != MODEL_MAGIC:
        raise FormatError(f"bad magic {data[:4]!r}, expected {MODEL_MAGIC!r}")
    (length,) = struct.unpack(">Q", data[4:12])
    if len(data) < 12 + length:
        raise TruncationError(f"payload declares {length} bytes, {len(data) - 12} present")
    if len(data) > 12 + length:
        raise FormatError(f"{len(data) - 12 - length} trailing bytes after payload")
    try:
        payload = json.loads(data[12 : 12 + length].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"payload is not valid JSON: {exc}") from None
    kind = payload.get("kind")
    try:
        trees = tuple(_tree_from_dict(t) for t in payload["trees"])
        importance = np.asarray(payload["importance"], dtype=np.float64)
        importance.setflags(write=False)
        if kind == "forest":
            return Forest(
                trees=trees,
                importance=importance,
                params=ForestParams(**payload["params"]),
                n_features=int(payload["n_features"]),
            )
        if kind == "boosted":
            return BoostedModel(
                trees=trees,
                importance=importance,
                params=BoostedParams(**payload["params"]),
                n_features=int(payload["n_features"]),
                base_score=float(payload["base_score"]),
                loss_history=tuple(float(x) for x in payload["loss_history"]),
            )
    except (KeyError, TypeError) as exc:
        raise FormatError(f"malformed model payload: {exc}") from None
    raise FormatError(f"unknown model kind {kind!r}")


def save_model(model, path: Path | str):
    Path(path).write_bytes(dumps_model(model))


def load_model(path: Path | str):
    return loads_model(Path(path).read_bytes())


_CONFIG_ORDER = {
    "forest": ("n_estimators", "max_depth", "min_samples_split", "criterion", "max_features", "random_state", "balance_classes"),
    "boosted": (
        "n_estimators",
        "max_depth",
        "learning_rate",
        "colsample_bytree",
        "colsample_bylevel",
        "reg_lambda",
        "gamma",
        "random_state",
        "balance_classes",
    ),
}


def _format_config_value(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_config(params, path: Path | str):
    """Flat key = value file; the model key picks the parameter set."""
    if isinstance(params, ForestParams):
        kind = "forest"
    elif isinstance(params, BoostedParams):
        kind = "boosted"
    else:
        raise TypeError(f"not a parameter set: {type(params).__name__}")
    lines = [f"model = {kind}"]
    for key in _CONFIG_ORDER[kind]:
        lines.append(f"{key} = {_format_config_value(getattr(params, key))}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _parse_config_value(text: str):
    if text == "none":
        return None
    if text in ("true", "false"):
        return text == "true"
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    return text


def read_config(path: Path | str):
    """Parse a key = value config back into a parameter set.

    Missing keys fall back to defaults; unknown keys are an error.
    """
    overrides = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise FormatError(f"{path}:{lineno}: expected key = value, got {line!r}")
        key, _, rest = line.partition("=")
        overrides[key.strip()] = _parse_config_value(rest.strip())
    kind = overrides.pop("model", None)
    if kind not in ("forest", "boosted"):
        raise FormatError(f"{path}: model must be 'forest' or 'boosted', got {kind!r}")
    allowed = set(_CONFIG_ORDER[kind])
    unknown = sorted(set(overrides) - allowed)
    if unknown:
        raise FormatError(f"{path}: unknown keys for {kind}: {', '.join(unknown)}")
    cls = ForestParams if kind == "forest" else BoostedParams
    return cls(**overrides)
