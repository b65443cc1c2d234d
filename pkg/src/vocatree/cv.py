"""Stratified fold assignment shared by the outer experiment loop and inner metric estimation."""

from __future__ import annotations

import numpy as np


def stratified_folds(strata, n_folds: int, rng: np.random.Generator) -> np.ndarray:
    """Fold index per item.

    Items are shuffled within each stratum, then dealt round-robin with one
    counter running across strata in sorted key order, so every stratum and
    every union of consecutive strata is spread within +-1 item per fold.
    """
    strata = list(strata)
    folds = np.empty(len(strata), dtype=int)
    counter = 0
    for key in sorted(set(strata)):
        members = np.array([i for i, s in enumerate(strata) if s == key])
        for i in members[rng.permutation(members.size)]:
            folds[i] = counter % n_folds
            counter += 1
    return folds


def seed_for(*parts: int) -> int:
    """Deterministic 32-bit seed from integer parts, independent of scheduling."""
    return int(np.random.SeedSequence([int(p) for p in parts]).generate_state(1)[0])
