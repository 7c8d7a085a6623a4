"""Per-activity multi-class identification: who produced this window?

One forest per (activity, sensor mask) over all subjects present for that
activity. Evaluation is stratified k-fold cross validation with subjects
overlapping between train and test, which is the closed-set setting the
experiments require. Accuracy is top-1, micro-averaged over test samples.
"""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import TrainingError
from .folds import stratified_folds
from .forest import DecisionForest, ForestParams, train_forest
from .ingest import FeatureTable
from .seeds import derive_seed

BENIGN = "benign"
ADVERSARIAL = "adversarial"
HISTOGRAM_BINS = 20


def _cell_seed(seed: int, activity: str, mask: tuple[str, ...], purpose: int) -> int:
    return derive_seed(seed, "id", purpose, activity, "+".join(mask))


def train_identification(
    table: FeatureTable,
    activity: str,
    mask: tuple[str, ...],
    seed: int,
    params: ForestParams = ForestParams(),
    n_jobs: int = 1,
) -> DecisionForest:
    """Train one identification forest on every window of one activity."""
    if mask != table.mask:
        raise TrainingError(f"table holds mask {table.mask}, requested {mask}")
    sub = table.filter(activity=activity)
    if len(sub) == 0:
        raise TrainingError(f"no windows for activity {activity!r} with mask {mask}")
    if np.unique(sub.subjects).size < 2:
        raise TrainingError(f"activity {activity!r} has windows from a single subject")
    return train_forest(
        sub.X, sub.subjects, params, seed=_cell_seed(seed, activity, mask, 1), n_jobs=n_jobs
    )


@dataclass
class AccuracyTable:
    """Per-(activity, mask) CV accuracy plus the per-mask average row."""

    cells: dict[tuple[str, tuple[str, ...]], float] = field(default_factory=dict)

    def masks(self) -> list[tuple[str, ...]]:
        return sorted({m for _, m in self.cells}, key=lambda m: (len(m), m))

    def activities(self) -> list[str]:
        return sorted({a for a, _ in self.cells})

    def average_row(self) -> dict[tuple[str, ...], float]:
        out = {}
        for mask in self.masks():
            vals = [v for (a, m), v in self.cells.items() if m == mask]
            out[mask] = float(np.mean(vals))
        return out


def _evaluate_cell(args) -> tuple[str, tuple[str, ...], float]:
    activity, mask, X, y, k, fold_seed, forest_seed, params = args
    fa = stratified_folds(y, k=k, seed=fold_seed)
    accs = []
    for fold in range(k):
        train_idx, test_idx = fa.train_test(fold)
        forest = train_forest(
            X[train_idx],
            y[train_idx],
            params,
            seed=int(np.random.SeedSequence([forest_seed, fold]).generate_state(1)[0]),
        )
        pred = forest.predict(X[test_idx])
        accs.append(float((pred == y[test_idx]).mean()))
    return activity, mask, float(np.mean(accs))


def evaluate_identification(
    tables: dict[tuple[str, ...], FeatureTable],
    activities,
    seed: int,
    k: int = 10,
    params: ForestParams = ForestParams(),
    n_jobs: int = 1,
) -> AccuracyTable:
    """Stratified k-fold CV accuracy for every (activity, mask) cell.

    Cells whose activity is absent from a table are skipped; cells where
    some subject has fewer than k windows propagate the stratification
    error, as the folds cannot be formed honestly.
    """
    jobs = []
    for mask in sorted(tables, key=lambda m: (len(m), m)):
        table = tables[mask]
        for activity in activities:
            sub = table.filter(activity=activity)
            if len(sub) == 0:
                continue
            jobs.append(
                (
                    activity,
                    mask,
                    sub.X,
                    sub.subjects,
                    k,
                    _cell_seed(seed, activity, mask, 2),
                    _cell_seed(seed, activity, mask, 3),
                    params,
                )
            )
    result = AccuracyTable()
    if n_jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            for activity, mask, acc in pool.map(_evaluate_cell, jobs):
                result.cells[(activity, mask)] = acc
    else:
        for job in jobs:
            activity, mask, acc = _evaluate_cell(job)
            result.cells[(activity, mask)] = acc
    return result


@dataclass
class ProbabilityStats:
    """Distribution of the predicted-class (top-1) probability over samples."""

    condition: str
    mean: float
    std: float
    histogram: np.ndarray  # HISTOGRAM_BINS counts over [0, 1]
    n_samples: int
    values: np.ndarray  # raw top-1 probabilities, kept for percentile policies
    correct: np.ndarray | None = None  # per-sample correctness when labels known


def probability_stats(
    model: DecisionForest,
    X: np.ndarray,
    condition: str,
    y_true: np.ndarray | None = None,
) -> ProbabilityStats:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("probability_stats needs a non-empty 2-d sample matrix")
    proba = model.predict_proba(X)
    top1 = proba.max(axis=1)
    hist, _ = np.histogram(top1, bins=HISTOGRAM_BINS, range=(0.0, 1.0))
    correct = None
    if y_true is not None:
        pred = model.classes[np.argmax(proba, axis=1)]
        correct = pred == np.asarray(y_true)
    return ProbabilityStats(
        condition=condition,
        mean=float(top1.mean()),
        std=float(top1.std()),
        histogram=hist,
        n_samples=X.shape[0],
        values=top1,
        correct=correct,
    )
