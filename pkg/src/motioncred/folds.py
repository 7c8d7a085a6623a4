"""Stratified k-fold assignment: per class, seeded shuffle then round-robin."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import StratificationError


@dataclass(frozen=True)
class FoldAssignment:
    k: int
    fold_of: np.ndarray  # fold id per sample index

    def train_test(self, fold: int) -> tuple[np.ndarray, np.ndarray]:
        test = np.nonzero(self.fold_of == fold)[0]
        train = np.nonzero(self.fold_of != fold)[0]
        return train, test


def stratified_folds(labels, k: int, seed: int) -> FoldAssignment:
    labels = np.asarray(labels)
    if k < 2:
        raise ValueError("k must be >= 2")
    fold_of = np.full(labels.shape[0], -1, dtype=np.int64)
    rng = np.random.default_rng(seed)
    for cls in np.unique(labels):
        idx = np.nonzero(labels == cls)[0]
        if idx.size < k:
            raise StratificationError(
                f"class {cls!r} has {idx.size} samples, fewer than k={k}"
            )
        shuffled = idx[rng.permutation(idx.size)]
        fold_of[shuffled] = np.arange(idx.size) % k
    return FoldAssignment(k=k, fold_of=fold_of)
