"""Independent reference implementations used only by the tests."""

import itertools

import numpy as np


def pre_emphasis_loop(x, mu=0.97):
    y = [float(x[0])]
    for n in range(1, len(x)):
        y.append(float(x[n]) - mu * float(x[n - 1]))
    return np.array(y)


def brute_relieff(X, y, k):
    """Textbook binary ReliefF: visit every instance, k nearest hits and misses by L1."""
    X = np.asarray(X, dtype=float)
    n, d = X.shape
    lo, hi = X.min(axis=0), X.max(axis=0)
    rng = hi - lo
    Z = np.zeros_like(X)
    for j in range(d):
        if rng[j] > 0:
            Z[:, j] = (X[:, j] - lo[j]) / rng[j]
    W = [0.0] * d
    for i in range(n):
        dists = []
        for r in range(n):
            if r == i:
                continue
            dists.append((sum(abs(Z[i, j] - Z[r, j]) for j in range(d)), r))
        dists.sort()
        hits = [r for _, r in dists if y[r] == y[i]][:k]
        misses = [r for _, r in dists if y[r] != y[i]][:k]
        for j in range(d):
            h = sum(abs(Z[i, j] - Z[r, j]) for r in hits) / k
            m = sum(abs(Z[i, j] - Z[r, j]) for r in misses) / k
            W[j] += (m - h) / n
    for j in range(d):
        if rng[j] == 0:
            W[j] = 0.0
    return np.array(W)


def step_interpreter(cards, predictions, strategy):
    """Literal walk of the count-to-2 pseudocode.

    ``cards``: list of (segment_id, acc, sens, spec); ``predictions``: segment_id -> +1/-1 (missing = absent).
    Returns (label, path).
    """
    def best(pool, criterion):
        top = None
        for c in pool:
            sid, acc, sens, spec = c
            if strategy == "sens_spec_tree":
                key = ({"sens": sens, "spec": spec}[criterion], acc, -sid)
            else:
                tie = {"sens": sens, "spec": spec, "none": 0.0}[criterion]
                key = (acc, tie, -sid) if criterion != "none" else (acc, -sid)
            if top is None or key > top[0]:
                top = (key, c)
        return top[1]

    health = 0
    depression = 0
    path = []
    pool = list(cards)
    if strategy == "sens_spec_tree":
        criterion = "sens"
    else:
        criterion = "none"
    while health < 2 and depression < 2:
        node = None
        while pool:
            cand = best(pool, criterion)
            pool.remove(cand)
            if predictions.get(cand[0]) is not None:
                node = cand
                break
        if node is None:
            return -1, path
        p = predictions[node[0]]
        path.append((node[0], p))
        if p == 1:
            health += 1
            criterion = "spec"
        else:
            depression += 1
            criterion = "sens"
    return (1 if health == 2 else -1), path


def vote_oracle(predictions):
    h = sum(1 for p in predictions.values() if p == 1)
    d = sum(1 for p in predictions.values() if p == -1)
    return 1 if h > d else -1


def expected_accuracy(cards, strategy, p_healthy=0.5):
    """Exact expected accuracy when each card errs independently at its sens/spec rates."""
    ids = [c[0] for c in cards]
    total = 0.0
    for truth in (1, -1):
        prior = p_healthy if truth == 1 else 1 - p_healthy
        for outcome in itertools.product((1, -1), repeat=len(cards)):
            w = 1.0
            for (sid, acc, sens, spec), o in zip(cards, outcome):
                if truth == -1:
                    w *= sens if o == -1 else 1 - sens
                else:
                    w *= spec if o == 1 else 1 - spec
            preds = dict(zip(ids, outcome))
            if strategy == "vote":
                label = vote_oracle(preds)
            else:
                label, _ = step_interpreter(cards, preds, strategy)
            if label == truth:
                total += prior * w
    return total


SCENARIO = [
    (1, 0.75, 1.0, 0.5),
    (2, 0.75, 0.5, 1.0),
    (3, 0.6, 0.6, 0.6),
    (4, 0.6, 0.6, 0.6),
    (5, 0.6, 0.6, 0.6),
]
