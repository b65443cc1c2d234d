"""Per-segment binary classifiers (soft-margin linear SVM, random forest) and segment metrics.

Labels: +1 healthy, -1 depressed. Decision value 0 and forest vote ties go to
-1; depressed is the positive class for sensitivity.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .cv import seed_for, stratified_folds
from .errors import ShapeError, SingleClassError, ValidationError

HEALTHY = 1
DEPRESSED = -1


def _check_xy(X, y) -> tuple[np.ndarray, np.ndarray]:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ShapeError("X must be 2-D with one row per label")
    if not np.all(np.isfinite(X)):
        raise ValidationError("non-finite feature values")
    if not set(np.unique(y).tolist()) <= {HEALTHY, DEPRESSED}:
        raise ValidationError("labels must be +1 (healthy) or -1 (depressed)")
    if np.unique(y).size < 2:
        raise SingleClassError("training data holds a single class")
    return X, y


# ---------------------------------------------------------------------------
# linear SVM


@dataclass
class LinearModel:
    w: np.ndarray
    b: float
    mean: np.ndarray
    std: np.ndarray
    C: float = 1.0
    selected: list[int] = field(default_factory=list)
    feature_names: list[str] = field(default_factory=list)
    alpha: np.ndarray | None = field(default=None, repr=False)
    converged: bool = True
    iterations: int = 0

    @property
    def n_features(self) -> int:
        return self.w.size

    def standardize(self, X) -> np.ndarray:
        return (np.asarray(X, dtype=np.float64) - self.mean) / self.std

    def decision_function(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.n_features:
            raise ShapeError(f"expected {self.n_features} features, got {X.shape[1]}")
        return self.standardize(X) @ self.w + self.b

    def predict_batch(self, X) -> np.ndarray:
        return np.where(self.decision_function(X) > 0.0, HEALTHY, DEPRESSED)

    def predict(self, x) -> int:
        return int(self.predict_batch(np.reshape(x, (1, -1)))[0])

    def to_dict(self) -> dict:
        return {
            "type": "linear_svm",
            "w": [float(v) for v in self.w],
            "b": float(self.b),
            "mean": [float(v) for v in self.mean],
            "std": [float(v) for v in self.std],
            "C": float(self.C),
            "selected": [int(i) for i in self.selected],
            "feature_names": list(self.feature_names),
            "converged": bool(self.converged),
            "iterations": int(self.iterations),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LinearModel":
        return cls(np.array(d["w"], dtype=np.float64), float(d["b"]), np.array(d["mean"], dtype=np.float64),
                   np.array(d["std"], dtype=np.float64), float(d["C"]), list(d["selected"]),
                   list(d["feature_names"]), None, bool(d["converged"]), int(d["iterations"]))


@njit(cache=True)
def _smo(K, y, C, tol, max_iter):
    """Dual soft-margin solver with second-order working-set selection.

    Returns (alpha, b, converged, iterations). Stops when the maximal
    violating pair gap is at most ``tol``.
    """
    n = y.size
    Q = np.empty((n, n))
    for r in range(n):
        for c in range(n):
            Q[r, c] = y[r] * y[c] * K[r, c]
    alpha = np.zeros(n)
    G = -np.ones(n)
    tau = 1e-12
    converged = False
    it = 0
    while it < max_iter:
        i = -1
        gmax = -np.inf
        gmin = np.inf
        for t in range(n):
            myg = -y[t] * G[t]
            if (y[t] > 0 and alpha[t] < C) or (y[t] < 0 and alpha[t] > 0):
                if myg > gmax:
                    gmax = myg
                    i = t
            if (y[t] < 0 and alpha[t] < C) or (y[t] > 0 and alpha[t] > 0):
                if myg < gmin:
                    gmin = myg
        if i < 0 or gmin == np.inf or gmax - gmin <= tol:
            converged = True
            break
        j = -1
        best = np.inf
        for t in range(n):
            if (y[t] < 0 and alpha[t] < C) or (y[t] > 0 and alpha[t] > 0):
                b_it = gmax + y[t] * G[t]
                if b_it > 0:
                    a_it = Q[i, i] + Q[t, t] - 2.0 * y[i] * y[t] * Q[i, t]
                    if a_it <= 0:
                        a_it = tau
                    score = -(b_it * b_it) / a_it
                    if score < best:
                        best = score
                        j = t
        if j < 0:
            converged = True
            break

        ai_old = alpha[i]
        aj_old = alpha[j]
        if y[i] != y[j]:
            quad = Q[i, i] + Q[j, j] + 2.0 * Q[i, j]
            if quad <= 0:
                quad = tau
            delta = (-G[i] - G[j]) / quad
            diff = ai_old - aj_old
            ai = ai_old + delta
            aj = aj_old + delta
            if diff > 0:
                if aj < 0:
                    aj = 0.0
                    ai = diff
            elif ai < 0:
                ai = 0.0
                aj = -diff
            if diff > 0:
                if ai > C:
                    ai = C
                    aj = C - diff
            elif aj > C:
                aj = C
                ai = C + diff
        else:
            quad = Q[i, i] + Q[j, j] - 2.0 * Q[i, j]
            if quad <= 0:
                quad = tau
            delta = (G[i] - G[j]) / quad
            total = ai_old + aj_old
            ai = ai_old - delta
            aj = aj_old + delta
            if total > C:
                if ai > C:
                    ai = C
                    aj = total - C
            elif aj < 0:
                aj = 0.0
                ai = total
            if total > C:
                if aj > C:
                    aj = C
                    ai = total - C
            elif ai < 0:
                ai = 0.0
                aj = total
        alpha[i] = ai
        alpha[j] = aj
        dai = ai - ai_old
        daj = aj - aj_old
        for t in range(n):
            G[t] += Q[i, t] * dai + Q[j, t] * daj
        it += 1

    # bias: mean over free vectors, else midpoint of the feasible interval
    n_free = 0
    sum_free = 0.0
    ub = np.inf
    lb = -np.inf
    for t in range(n):
        yg = y[t] * G[t]
        if alpha[t] >= C:
            if y[t] < 0:
                ub = min(ub, yg)
            else:
                lb = max(lb, yg)
        elif alpha[t] <= 0:
            if y[t] > 0:
                ub = min(ub, yg)
            else:
                lb = max(lb, yg)
        else:
            n_free += 1
            sum_free += yg
    if n_free > 0:
        rho = sum_free / n_free
    elif ub < np.inf and lb > -np.inf:
        rho = (ub + lb) / 2.0
    elif ub < np.inf:
        rho = ub
    else:
        rho = lb
    return alpha, -rho, converged, it


def train_linear_svm(X, y, C: float = 1.0, tol: float = 1e-3, max_passes: int = 1000,
                     selected=None, feature_names=None) -> LinearModel:
    """Soft-margin linear SVM on training-standardised features.

    ``max_passes`` bounds the solver at ``max_passes * n_samples`` pair updates;
    ``converged`` on the returned model reports whether the KKT gap reached ``tol``.
    """
    X, y = _check_xy(X, y)
    if C <= 0 or tol <= 0:
        raise ValidationError("C and tol must be positive")
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    std = np.where(std > 0, std, 1.0)
    Z = (X - mean) / std
    K = Z @ Z.T
    alpha, b, converged, it = _smo(K, y.astype(np.float64), float(C), float(tol), int(max_passes * y.size))
    w = Z.T @ (alpha * y)
    if not converged:
        warnings.warn(f"SVM solver stopped after {it} updates without reaching tol={tol}", stacklevel=2)
    return LinearModel(w, float(b), mean, std, C, list(selected or []), list(feature_names or []), alpha,
                       converged, it)


def kkt_violations(model: LinearModel, X, y) -> np.ndarray:
    """Per-sample distance from the soft-margin optimality conditions (needs ``model.alpha``)."""
    if model.alpha is None:
        raise ValidationError("model carries no dual coefficients")
    y = np.asarray(y, dtype=np.float64)
    margin = y * model.decision_function(X)
    a, C = model.alpha, model.C
    eps = 1e-12 * max(C, 1.0)
    v = np.where(a <= eps, np.maximum(0.0, 1.0 - margin),
                 np.where(a >= C - eps, np.maximum(0.0, margin - 1.0), np.abs(margin - 1.0)))
    return v


# ---------------------------------------------------------------------------
# random forest


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 100
    max_depth: int | None = None
    max_features: int | None = None  # None -> floor(sqrt(D))


@dataclass
class Tree:
    feature: np.ndarray    # -1 at leaves
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray      # leaf label (+1/-1); majority label at internal nodes
    n_samples: np.ndarray

    def apply(self, X: np.ndarray) -> np.ndarray:
        return _apply(self.feature, self.threshold, self.left, self.right,
                      np.ascontiguousarray(X, dtype=np.float64))

    def predict_batch(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]

    def to_dict(self) -> dict:
        return {k: [float(v) if k == "threshold" else int(v) for v in getattr(self, k)]
                for k in ("feature", "threshold", "left", "right", "value", "n_samples")}

    @classmethod
    def from_dict(cls, d: dict) -> "Tree":
        return cls(np.array(d["feature"], dtype=np.int64), np.array(d["threshold"], dtype=np.float64),
                   np.array(d["left"], dtype=np.int64), np.array(d["right"], dtype=np.int64),
                   np.array(d["value"], dtype=np.int64), np.array(d["n_samples"], dtype=np.int64))


@njit(cache=True)
def _grow(X, y, keys, max_features, max_depth):
    """Depth-first CART growth with Gini splits.

    ``keys[node]`` holds the random sort keys that fix the feature draw order
    at that node. Returns node arrays trimmed to the number of nodes used.
    """
    n, d = X.shape
    cap = 2 * n + 1
    feature = np.full(cap, -1, dtype=np.int64)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, dtype=np.int64)
    right = np.full(cap, -1, dtype=np.int64)
    value = np.zeros(cap, dtype=np.int64)
    n_samples = np.zeros(cap, dtype=np.int64)
    depth = np.zeros(cap, dtype=np.int64)

    members = np.empty((cap, n), dtype=np.int64)
    counts = np.zeros(cap, dtype=np.int64)
    members[0, :] = np.arange(n)
    counts[0] = n
    n_nodes = 1
    stack = np.empty(cap, dtype=np.int64)
    stack[0] = 0
    top = 1
    while top > 0:
        top -= 1
        node = stack[top]
        m = counts[node]
        idx = members[node, :m]
        pos = 0
        for t in range(m):
            if y[idx[t]] > 0:
                pos += 1
        value[node] = 1 if pos > m - pos else -1
        n_samples[node] = m
        if pos == 0 or pos == m or (max_depth >= 0 and depth[node] >= max_depth):
            continue

        order = np.argsort(keys[node])
        best_gini = np.inf
        best_f = -1
        best_thr = 0.0
        tried = 0
        for rank in range(d):
            if tried >= max_features and best_f >= 0:
                break
            f = order[rank]
            tried += 1
            vals = np.empty(m)
            for t in range(m):
                vals[t] = X[idx[t], f]
            srt = np.argsort(vals, kind="mergesort")
            pl = 0
            for k in range(m - 1):
                if y[idx[srt[k]]] > 0:
                    pl += 1
                a = vals[srt[k]]
                b = vals[srt[k + 1]]
                if not b > a:
                    continue
                nl = k + 1
                nr = m - nl
                fl = pl / nl
                fr = (pos - pl) / nr
                g = nl * 2.0 * fl * (1.0 - fl) + nr * 2.0 * fr * (1.0 - fr)
                if g < best_gini:
                    best_gini = g
                    best_f = f
                    thr = 0.5 * (a + b)
                    best_thr = thr if thr < b else a
        if best_f < 0:
            continue
        li = n_nodes
        ri = n_nodes + 1
        n_nodes += 2
        cl = 0
        cr = 0
        for t in range(m):
            s = idx[t]
            if X[s, best_f] <= best_thr:
                members[li, cl] = s
                cl += 1
            else:
                members[ri, cr] = s
                cr += 1
        counts[li] = cl
        counts[ri] = cr
        depth[li] = depth[node] + 1
        depth[ri] = depth[node] + 1
        feature[node] = best_f
        threshold[node] = best_thr
        left[node] = li
        right[node] = ri
        stack[top] = ri
        stack[top + 1] = li
        top += 2
    return (feature[:n_nodes], threshold[:n_nodes], left[:n_nodes], right[:n_nodes],
            value[:n_nodes], n_samples[:n_nodes])


@njit(cache=True)
def _apply(feature, threshold, left, right, X):
    out = np.empty(X.shape[0], dtype=np.int64)
    for r in range(X.shape[0]):
        node = 0
        while feature[node] >= 0:
            if X[r, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[r] = node
    return out


def grow_tree(X: np.ndarray, y: np.ndarray, rng: np.random.Generator, max_features: int,
              max_depth: int | None) -> Tree:
    """One Gini tree. At each node ``max_features`` features are drawn; if none
    of them can split, further features are tried in draw order."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    keys = rng.random((2 * X.shape[0] + 1, X.shape[1]))
    arrays = _grow(X, np.asarray(y, dtype=np.int64), keys, int(max_features),
                   -1 if max_depth is None else int(max_depth))
    return Tree(*arrays)


@dataclass
class ForestModel:
    trees: list[Tree]
    tree_seeds: list[int]
    n_features: int
    config: ForestConfig = field(default_factory=ForestConfig)
    oob_accuracy: float | None = None
    selected: list[int] = field(default_factory=list)
    feature_names: list[str] = field(default_factory=list)

    def votes(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.n_features:
            raise ShapeError(f"expected {self.n_features} features, got {X.shape[1]}")
        return np.array([t.predict_batch(X) for t in self.trees])

    def predict_batch(self, X) -> np.ndarray:
        s = self.votes(X).sum(axis=0)
        return np.where(s > 0, HEALTHY, DEPRESSED)

    def predict(self, x) -> int:
        return int(self.predict_batch(np.reshape(x, (1, -1)))[0])

    def to_dict(self) -> dict:
        return {
            "type": "random_forest",
            "n_features": self.n_features,
            "config": {"n_trees": self.config.n_trees, "max_depth": self.config.max_depth,
                       "max_features": self.config.max_features},
            "tree_seeds": [int(s) for s in self.tree_seeds],
            "oob_accuracy": self.oob_accuracy,
            "selected": [int(i) for i in self.selected],
            "feature_names": list(self.feature_names),
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ForestModel":
        return cls([Tree.from_dict(t) for t in d["trees"]], list(d["tree_seeds"]), int(d["n_features"]),
                   ForestConfig(**d["config"]), d["oob_accuracy"], list(d["selected"]), list(d["feature_names"]))


def train_random_forest(X, y, cfg: ForestConfig = ForestConfig(), rng_seed: int = 0,
                        selected=None, feature_names=None) -> ForestModel:
    """Bootstrap-aggregated Gini trees; each tree is reproducible from its recorded seed."""
    X, y = _check_xy(X, y)
    n, d = X.shape
    mtry = cfg.max_features or max(1, int(math.floor(math.sqrt(d))))
    seeds = [seed_for(rng_seed, t) for t in range(cfg.n_trees)]
    trees = []
    oob_votes = np.zeros(n)
    oob_seen = np.zeros(n, dtype=bool)
    for s in seeds:
        rng = np.random.default_rng(s)
        boot = rng.integers(0, n, size=n)
        tree = grow_tree(X[boot], y[boot], rng, mtry, cfg.max_depth)
        trees.append(tree)
        oob = np.ones(n, dtype=bool)
        oob[boot] = False
        if oob.any():
            oob_votes[oob] += tree.predict_batch(X[oob])
            oob_seen |= oob
    oob_acc = None
    if oob_seen.any():
        pred = np.where(oob_votes[oob_seen] > 0, HEALTHY, DEPRESSED)
        oob_acc = float(np.mean(pred == y[oob_seen]))
    return ForestModel(trees, seeds, d, cfg, oob_acc, list(selected or []), list(feature_names or []))


def predict(model, x) -> int:
    return model.predict(x)


def predict_batch(model, X) -> np.ndarray:
    return model.predict_batch(X)


def model_from_dict(d: dict):
    if d.get("type") == "linear_svm":
        return LinearModel.from_dict(d)
    if d.get("type") == "random_forest":
        return ForestModel.from_dict(d)
    raise ValidationError(f"unknown model type {d.get('type')!r}")


# ---------------------------------------------------------------------------
# metrics


@dataclass(frozen=True)
class SegmentMetrics:
    accuracy: float
    sensitivity: float
    specificity: float
    n_depressed: int
    n_healthy: int

    def as_dict(self) -> dict:
        return {"accuracy": self.accuracy, "sensitivity": self.sensitivity, "specificity": self.specificity,
                "n_depressed": self.n_depressed, "n_healthy": self.n_healthy}


def confusion_counts(y_true, y_pred) -> tuple[int, int, int, int]:
    """(TP, FN, TN, FP) with depressed as the positive class."""
    t = np.asarray(y_true)
    p = np.asarray(y_pred)
    tp = int(np.sum((t == DEPRESSED) & (p == DEPRESSED)))
    fn = int(np.sum((t == DEPRESSED) & (p == HEALTHY)))
    tn = int(np.sum((t == HEALTHY) & (p == HEALTHY)))
    fp = int(np.sum((t == HEALTHY) & (p == DEPRESSED)))
    return tp, fn, tn, fp


def metrics_from_counts(tp: int, fn: int, tn: int, fp: int) -> SegmentMetrics:
    n_dep, n_hea = tp + fn, tn + fp
    total = n_dep + n_hea
    return SegmentMetrics(
        accuracy=(tp + tn) / total if total else 0.0,
        sensitivity=tp / n_dep if n_dep else 0.0,
        specificity=tn / n_hea if n_hea else 0.0,
        n_depressed=n_dep,
        n_healthy=n_hea,
    )


def metrics_from_predictions(y_true, y_pred) -> SegmentMetrics:
    return metrics_from_counts(*confusion_counts(y_true, y_pred))


class _Constant:
    def __init__(self, label: int):
        self.label = label

    def predict_batch(self, X):
        return np.full(np.atleast_2d(X).shape[0], self.label)


def estimate_segment_metrics(model_factory, X_train, y_train, inner_folds: int = 4,
                             rng_seed: int = 0) -> SegmentMetrics:
    """Out-of-sample metrics from a stratified inner CV over the training partition only.

    Held-out predictions from every inner fold are pooled into one confusion
    matrix. Falls back to leave-one-out when a class has fewer members than
    ``inner_folds``.
    """
    X = np.asarray(X_train, dtype=np.float64)
    y = np.asarray(y_train, dtype=np.int64)
    if np.unique(y).size < 2:
        raise SingleClassError("metric estimation needs both classes")
    smallest = min(int(np.sum(y == HEALTHY)), int(np.sum(y == DEPRESSED)))
    if smallest >= inner_folds:
        folds = stratified_folds(y.tolist(), inner_folds, np.random.default_rng(rng_seed))
    else:
        warnings.warn(f"class of size {smallest} cannot fill {inner_folds} folds; using leave-one-out",
                      stacklevel=2)
        folds = np.arange(y.size)
    pred = np.empty_like(y)
    for f in np.unique(folds):
        test = folds == f
        ytr = y[~test]
        model = model_factory(X[~test], ytr) if np.unique(ytr).size == 2 else _Constant(int(ytr[0]))
        pred[test] = model.predict_batch(X[test])
    return metrics_from_predictions(y, pred)
