"""ReliefF feature weighting and top-n / threshold selection."""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import EmptyInputError, SingleClassError, ValidationError


@dataclass(frozen=True)
class ReliefConfig:
    k_neighbors: int = 10
    n_iterations: int | str = "all"
    tau: float | None = None
    top_n: int = 20
    rng_seed: int = 0

    def __post_init__(self):
        if self.k_neighbors < 1:
            raise ValidationError("k_neighbors must be >= 1")
        if self.top_n < 1:
            raise ValidationError("top_n must be >= 1")
        if self.n_iterations != "all" and (not isinstance(self.n_iterations, int) or self.n_iterations < 1):
            raise ValidationError("n_iterations must be a positive int or 'all'")


@dataclass(frozen=True)
class FeatureWeights:
    weights: np.ndarray
    mins: np.ndarray
    ranges: np.ndarray
    k_used: int

    def __len__(self) -> int:
        return self.weights.size


def range_normalize(X: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Scale each column to [0, 1] by its min/max; constant columns map to 0."""
    mins = X.min(axis=0)
    ranges = X.max(axis=0) - mins
    safe = np.where(ranges > 0, ranges, 1.0)
    Xn = np.where(ranges > 0, (X - mins) / safe, 0.0)
    return Xn, mins, ranges


def sample_order(n: int, cfg: ReliefConfig) -> np.ndarray:
    """Instances visited by the weight update, in visiting order."""
    if cfg.n_iterations == "all" or cfg.n_iterations >= n:
        return np.arange(n)
    rng = np.random.default_rng(cfg.rng_seed)
    return rng.choice(n, size=cfg.n_iterations, replace=False)


def relief_weights(X, y, cfg: ReliefConfig = ReliefConfig()) -> FeatureWeights:
    """Binary ReliefF with Manhattan distance on range-normalised features.

    For every visited instance the k nearest same-class neighbours (hits)
    and k nearest other-class neighbours (misses) are found; each feature's
    weight moves down by the mean hit difference and up by the mean miss
    difference, divided by the number of visited instances. Distance ties
    resolve to the lower sample index.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    if X.ndim != 2 or X.shape[0] == 0:
        raise EmptyInputError("relief needs a non-empty sample matrix")
    if X.shape[0] != y.shape[0]:
        raise ValidationError("X and y disagree on sample count")
    if not np.all(np.isfinite(X)):
        raise ValidationError("relief input contains NaN or infinite values")
    classes = np.unique(y)
    if classes.size < 2:
        raise SingleClassError("relief needs both classes")
    if classes.size > 2:
        raise ValidationError("relief here is binary only")
    smallest = min(int(np.sum(y == c)) for c in classes)
    if smallest < 2:
        raise ValidationError("relief needs at least two samples per class")

    k = cfg.k_neighbors
    if k > smallest - 1:
        warnings.warn(f"k_neighbors={k} clamped to {smallest - 1} (smallest class has {smallest})", stacklevel=2)
        k = smallest - 1

    Xn, mins, ranges = range_normalize(X)
    n, d = Xn.shape
    order = sample_order(n, cfg)
    m = float(order.size)
    idx = np.arange(n)
    w = np.zeros(d)
    for i in order:
        diff = np.abs(Xn - Xn[i])
        dist = diff.sum(axis=1)
        same = (y == y[i]) & (idx != i)
        other = y != y[i]
        hits = idx[same][np.argsort(dist[same], kind="stable")[:k]]
        misses = idx[other][np.argsort(dist[other], kind="stable")[:k]]
        hit_term = diff[hits].sum(axis=0) / k
        miss_term = diff[misses].sum(axis=0) / k
        w = w + (miss_term - hit_term) / m
    w[ranges == 0] = 0.0
    return FeatureWeights(w, mins, ranges, k)


def select_features(weights, cfg: ReliefConfig = ReliefConfig()) -> list[int]:
    """Indices kept: threshold by ``tau`` first, then the ``top_n`` heaviest (ties to lower index)."""
    w = np.asarray(getattr(weights, "weights", weights), dtype=np.float64)
    if not np.all(np.isfinite(w)):
        raise ValidationError("weights must be finite")
    survivors = [i for i in range(w.size) if cfg.tau is None or w[i] >= cfg.tau]
    ranked = sorted(survivors, key=lambda i: (-w[i], i))
    if len(ranked) < cfg.top_n:
        warnings.warn(f"only {len(ranked)} features survive selection (top_n={cfg.top_n})", stacklevel=2)
    return ranked[:cfg.top_n]


def write_weights_csv(path, names, weights: FeatureWeights, selected) -> None:
    chosen = set(selected)
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["feature_name", "weight", "selected"])
        for i, name in enumerate(names):
            w.writerow([name, repr(float(weights.weights[i])), int(i in chosen)])
