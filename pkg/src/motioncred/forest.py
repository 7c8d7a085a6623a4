"""From-scratch random forest with calibrated class probabilities.

Trees are grown by exact greedy Gini splits over a per-node random feature
subset; every tree derives its own RNG from (master_seed, tree_index), so a
forest is bit-identical no matter how many worker threads build it. Leaf
class counts are Laplace-smoothed (alpha = 1) at prediction time, which keeps
every class probability strictly inside (0, 1) -- the verification gate and
the attack loss both take logs of these numbers.
"""
from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ShapeError, TrainingError

SCHEMA_VERSION = 1
LAPLACE_ALPHA = 1.0


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 100
    max_depth: int | None = None
    min_leaf: int = 1
    features_per_split: int | None = None  # None -> ceil(sqrt(d))
    bootstrap: bool = True

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        if self.min_leaf < 1:
            raise ValueError("min_leaf must be >= 1")
        if self.max_depth is not None and self.max_depth < 1:
            raise ValueError("max_depth must be >= 1 or None")
        if self.features_per_split is not None and self.features_per_split < 1:
            raise ValueError("features_per_split must be >= 1 or None")


@dataclass
class Tree:
    """Flat-array binary tree. feature[i] == -1 marks a leaf."""

    feature: np.ndarray  # int64
    threshold: np.ndarray  # float64
    left: np.ndarray  # int64
    right: np.ndarray  # int64
    counts: np.ndarray  # (n_nodes, n_classes) int64; zero rows for internal nodes

    def leaf_proba(self) -> np.ndarray:
        smoothed = self.counts + LAPLACE_ALPHA
        return smoothed / smoothed.sum(axis=1, keepdims=True)


@dataclass
class DecisionForest:
    trees: list[Tree]
    classes: np.ndarray
    n_features: int
    params: ForestParams
    master_seed: int
    _leaf_proba: list[np.ndarray] = field(default_factory=list, repr=False)

    @property
    def n_trees(self) -> int:
        return len(self.trees)

    def _cached_leaf_proba(self) -> list[np.ndarray]:
        if len(self._leaf_proba) != len(self.trees):
            self._leaf_proba = [t.leaf_proba() for t in self.trees]
        return self._leaf_proba

    def _check_dim(self, d: int) -> None:
        if d != self.n_features:
            raise ShapeError(f"expected {self.n_features} features, got {d}")

    def predict_proba_one(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=np.float64).ravel()
        self._check_dim(v.size)
        acc = np.zeros(len(self.classes))
        for tree, proba in zip(self.trees, self._cached_leaf_proba()):
            node = 0
            feat = tree.feature
            while feat[node] >= 0:
                if v[feat[node]] <= tree.threshold[node]:
                    node = tree.left[node]
                else:
                    node = tree.right[node]
            acc += proba[node]
        return acc / len(self.trees)

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            return self.predict_proba_one(X)
        self._check_dim(X.shape[1])
        n = X.shape[0]
        acc = np.zeros((n, len(self.classes)))
        rows = np.arange(n)
        for tree, proba in zip(self.trees, self._cached_leaf_proba()):
            node = np.zeros(n, dtype=np.int64)
            while True:
                f = tree.feature[node]
                active = f >= 0
                if not active.any():
                    break
                r = rows[active]
                go_left = X[r, f[active]] <= tree.threshold[node[active]]
                node[r] = np.where(go_left, tree.left[node[active]], tree.right[node[active]])
            acc += proba[node]
        return acc / len(self.trees)

    def predict(self, X: np.ndarray) -> np.ndarray:
        proba = self.predict_proba(X)
        if proba.ndim == 1:
            return self.classes[int(np.argmax(proba))]
        return self.classes[np.argmax(proba, axis=1)]

    # -- persistence ------------------------------------------------------

    def to_document(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "params": {
                "n_trees": self.params.n_trees,
                "max_depth": self.params.max_depth,
                "min_leaf": self.params.min_leaf,
                "features_per_split": self.params.features_per_split,
                "bootstrap": self.params.bootstrap,
            },
            "master_seed": self.master_seed,
            "n_features": self.n_features,
            "classes": self.classes.tolist(),
            "trees": [
                {
                    "feature": t.feature.tolist(),
                    "threshold": t.threshold.tolist(),
                    "left": t.left.tolist(),
                    "right": t.right.tolist(),
                    "counts": t.counts.tolist(),
                }
                for t in self.trees
            ],
        }

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_document(), fh, separators=(",", ":"))

    @classmethod
    def from_document(cls, doc: dict) -> "DecisionForest":
        if doc.get("schema_version") != SCHEMA_VERSION:
            raise ValueError(f"unsupported forest schema version {doc.get('schema_version')!r}")
        trees = [
            Tree(
                feature=np.asarray(t["feature"], dtype=np.int64),
                threshold=np.asarray(t["threshold"], dtype=np.float64),
                left=np.asarray(t["left"], dtype=np.int64),
                right=np.asarray(t["right"], dtype=np.int64),
                counts=np.asarray(t["counts"], dtype=np.int64),
            )
            for t in doc["trees"]
        ]
        return cls(
            trees=trees,
            classes=np.asarray(doc["classes"]),
            n_features=int(doc["n_features"]),
            params=ForestParams(**doc["params"]),
            master_seed=int(doc["master_seed"]),
        )

    @classmethod
    def load(cls, path: str | Path) -> "DecisionForest":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_document(json.load(fh))


def _best_split(X, y_idx, idx, feats, min_leaf, n_classes):
    """Exact greedy Gini split over the given feature subset, or None."""
    n = idx.size
    labels = y_idx[idx]
    onehot = np.zeros((n, n_classes), dtype=np.float64)
    onehot[np.arange(n), labels] = 1.0
    total = onehot.sum(axis=0)
    best_cost = np.inf
    best_feat = -1
    best_thr = 0.0
    for f in feats:
        v = X[idx, f]
        order = np.argsort(v, kind="stable")
        sv = v[order]
        boundaries = np.nonzero(sv[:-1] < sv[1:])[0]
        if boundaries.size == 0:
            continue
        nl = boundaries + 1
        nr = n - nl
        if min_leaf > 1:
            ok = (nl >= min_leaf) & (nr >= min_leaf)
            boundaries, nl, nr = boundaries[ok], nl[ok], nr[ok]
            if boundaries.size == 0:
                continue
        cum = np.cumsum(onehot[order], axis=0)
        lc = cum[boundaries]
        rc = total[None, :] - lc
        gini_l = 1.0 - ((lc / nl[:, None]) ** 2).sum(axis=1)
        gini_r = 1.0 - ((rc / nr[:, None]) ** 2).sum(axis=1)
        cost = (nl * gini_l + nr * gini_r) / n
        j = int(np.argmin(cost))
        if cost[j] < best_cost:
            b = boundaries[j]
            thr = (sv[b] + sv[b + 1]) / 2.0
            if thr >= sv[b + 1]:  # float midpoint collapsed onto the right value
                thr = sv[b]
            best_cost = float(cost[j])
            best_feat = int(f)
            best_thr = float(thr)
    if best_feat < 0:
        return None
    return best_cost, best_feat, best_thr


def _grow_tree(X, y_idx, n_classes, params: ForestParams, rng: np.random.Generator) -> Tree:
    n, d = X.shape
    m = params.features_per_split or int(np.ceil(np.sqrt(d)))
    m = min(m, d)

    if params.bootstrap:
        sample = rng.integers(0, n, size=n)
    else:
        sample = np.arange(n)

    feature: list[int] = []
    threshold: list[float] = []
    left: list[int] = []
    right: list[int] = []
    counts: list[np.ndarray] = []

    def new_node() -> int:
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        counts.append(np.zeros(n_classes, dtype=np.int64))
        return len(feature) - 1

    root = new_node()
    stack = [(root, sample, 0)]
    while stack:
        node, idx, depth = stack.pop()
        node_counts = np.bincount(y_idx[idx], minlength=n_classes)
        pure = node_counts.max() == idx.size
        depth_capped = params.max_depth is not None and depth >= params.max_depth
        split = None
        if not pure and not depth_capped and idx.size >= 2 * params.min_leaf:
            feats = rng.choice(d, size=m, replace=False)
            split = _best_split(X, y_idx, idx, feats, params.min_leaf, n_classes)
        if split is None:
            counts[node] = node_counts
            continue
        _, f, thr = split
        go_left = X[idx, f] <= thr
        feature[node] = f
        threshold[node] = thr
        left_id = new_node()
        right_id = new_node()
        left[node] = left_id
        right[node] = right_id
        # Right pushed first so the left branch grows first (fixed DFS order
        # keeps per-node feature draws deterministic).
        stack.append((right_id, idx[~go_left], depth + 1))
        stack.append((left_id, idx[go_left], depth + 1))

    return Tree(
        feature=np.asarray(feature, dtype=np.int64),
        threshold=np.asarray(threshold, dtype=np.float64),
        left=np.asarray(left, dtype=np.int64),
        right=np.asarray(right, dtype=np.int64),
        counts=np.vstack(counts),
    )


def train_forest(
    X: np.ndarray,
    y: np.ndarray,
    params: ForestParams = ForestParams(),
    seed: int = 0,
    n_jobs: int = 1,
) -> DecisionForest:
    """Train a forest; output is independent of n_jobs."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    if X.ndim != 2:
        raise ShapeError("X must be a 2-d sample matrix")
    if X.shape[0] != y.shape[0]:
        raise ShapeError(f"{X.shape[0]} samples but {y.shape[0]} labels")
    classes, y_idx = np.unique(y, return_inverse=True)
    if classes.size < 2:
        raise TrainingError("training data contains a single class")
    n_classes = classes.size

    def build(tree_index: int) -> Tree:
        rng = np.random.default_rng(np.random.SeedSequence([seed, tree_index]))
        return _grow_tree(X, y_idx, n_classes, params, rng)

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            trees = list(pool.map(build, range(params.n_trees)))
    else:
        trees = [build(i) for i in range(params.n_trees)]

    return DecisionForest(
        trees=trees,
        classes=classes,
        n_features=X.shape[1],
        params=params,
        master_seed=seed,
    )
