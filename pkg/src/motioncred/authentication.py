"""Per-user binary authentication: genuine subject versus grouped imposters.

Splits keep the imposter identities in train and test disjoint -- real
deployments never see the test-time imposters during enrollment -- and
balance each side by downsampling imposter windows to the genuine count.
Performance is summarized by the equal error rate on the genuine-class
probability score.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import SplitError, TrainingError
from .forest import DecisionForest, ForestParams, train_forest
from .identification import HISTOGRAM_BINS, ProbabilityStats
from .ingest import FeatureTable

GENUINE = "genuine"
IMPOSTER = "imposter"

GENUINE_TRAIN_FRACTION = 0.7
MIN_GENUINE_WINDOWS = 10


@dataclass
class AuthSplit:
    subject: int
    X_train: np.ndarray
    y_train: np.ndarray  # GENUINE / IMPOSTER
    X_test: np.ndarray
    y_test: np.ndarray
    train_imposter_ids: frozenset[int]
    test_imposter_ids: frozenset[int]


def build_auth_split(
    table: FeatureTable,
    subject: int,
    activity: str,
    seed: int,
) -> AuthSplit:
    """70/30 genuine split; imposter ids halved disjointly between sides."""
    sub = table.filter(activity=activity)
    genuine = sub.X[sub.subjects == subject]
    if genuine.shape[0] < MIN_GENUINE_WINDOWS:
        raise SplitError(
            f"subject {subject} has {genuine.shape[0]} windows for activity "
            f"{activity!r}; need at least {MIN_GENUINE_WINDOWS}"
        )
    others = np.unique(sub.subjects[sub.subjects != subject])
    if others.size < 2:
        raise SplitError("need at least 2 other subjects to form disjoint imposter sets")

    rng = np.random.default_rng(seed)

    g_idx = rng.permutation(genuine.shape[0])
    n_train = int(genuine.shape[0] * GENUINE_TRAIN_FRACTION)
    n_train = min(max(n_train, 1), genuine.shape[0] - 1)
    g_train = genuine[g_idx[:n_train]]
    g_test = genuine[g_idx[n_train:]]

    shuffled = others[rng.permutation(others.size)]
    half = (others.size + 1) // 2
    train_ids = frozenset(int(s) for s in shuffled[:half])
    test_ids = frozenset(int(s) for s in shuffled[half:])

    def draw(ids: frozenset[int], count: int, side: str) -> np.ndarray:
        pool = sub.X[np.isin(sub.subjects, list(ids))]
        if pool.shape[0] < count:
            raise SplitError(
                f"{side} imposter pool has {pool.shape[0]} windows, need {count}"
            )
        pick = rng.choice(pool.shape[0], size=count, replace=False)
        return pool[pick]

    i_train = draw(train_ids, g_train.shape[0], "train")
    i_test = draw(test_ids, g_test.shape[0], "test")

    return AuthSplit(
        subject=subject,
        X_train=np.vstack([g_train, i_train]),
        y_train=np.array([GENUINE] * g_train.shape[0] + [IMPOSTER] * i_train.shape[0]),
        X_test=np.vstack([g_test, i_test]),
        y_test=np.array([GENUINE] * g_test.shape[0] + [IMPOSTER] * i_test.shape[0]),
        train_imposter_ids=train_ids,
        test_imposter_ids=test_ids,
    )


def train_authentication(split: AuthSplit, seed: int, params: ForestParams = ForestParams()) -> DecisionForest:
    forest = train_forest(split.X_train, split.y_train, params, seed=seed)
    if list(forest.classes) != [GENUINE, IMPOSTER]:
        raise TrainingError("authentication forest must see both classes")
    return forest


def genuine_probability(model: DecisionForest, X: np.ndarray) -> np.ndarray:
    """Authentication score: probability of the genuine class."""
    gen_col = int(np.nonzero(model.classes == GENUINE)[0][0])
    proba = model.predict_proba(np.asarray(X, dtype=np.float64))
    if proba.ndim == 1:
        return proba[gen_col]
    return proba[:, gen_col]


@dataclass(frozen=True)
class RocCurve:
    thresholds: np.ndarray  # ascending
    far: np.ndarray  # non-increasing
    frr: np.ndarray  # non-decreasing

    def save_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("threshold,far,frr\n")
            for t, fa, fr in zip(self.thresholds, self.far, self.frr):
                fh.write(f"{t:.4f},{fa:.4f},{fr:.4f}\n")


def roc_and_eer(scores) -> tuple[RocCurve, float]:
    """ROC over all observed score thresholds plus {0, 1}, and the EER.

    ``scores`` is a sequence of (genuine_probability, is_genuine) pairs. A
    sample is accepted when its score >= threshold. FAR = accepted imposters
    / imposters; FRR = rejected genuines / genuines. The EER is read off at
    the FAR = FRR crossing with linear interpolation between thresholds.
    """
    values = np.array([s for s, _ in scores], dtype=np.float64)
    labels = np.array([bool(g) for _, g in scores])
    if labels.all() or (~labels).all():
        raise ValueError("need both genuine and imposter scores")

    thresholds = np.unique(np.concatenate([values, [0.0, 1.0]]))
    gen = values[labels]
    imp = values[~labels]
    # accepted iff score >= threshold
    far = (imp[None, :] >= thresholds[:, None]).mean(axis=1)
    frr = (gen[None, :] < thresholds[:, None]).mean(axis=1)

    diff = far - frr  # non-increasing in threshold
    cross = int(np.searchsorted(-diff, 0.0, side="left"))
    if cross == 0:
        eer = float((far[0] + frr[0]) / 2.0)
    elif cross >= len(thresholds):
        eer = float((far[-1] + frr[-1]) / 2.0)
    else:
        d0, d1 = diff[cross - 1], diff[cross]
        t = 0.0 if d0 == d1 else d0 / (d0 - d1)
        far_x = far[cross - 1] + t * (far[cross] - far[cross - 1])
        frr_x = frr[cross - 1] + t * (frr[cross] - frr[cross - 1])
        eer = float((far_x + frr_x) / 2.0)

    return RocCurve(thresholds=thresholds, far=far, frr=frr), eer


@dataclass
class EerReport:
    """EER per (subject, activity, condition) with per-activity aggregation."""

    entries: dict[tuple[int, str, str], float] = field(default_factory=dict)

    def add(self, subject: int, activity: str, condition: str, eer: float) -> None:
        self.entries[(subject, activity, condition)] = eer

    def activity_summary(self) -> list[tuple[str, str, float, float, int]]:
        """Rows of (activity, condition, mean_eer, std_eer, n_subjects)."""
        groups: dict[tuple[str, str], list[float]] = {}
        for (_, activity, condition), eer in self.entries.items():
            groups.setdefault((activity, condition), []).append(eer)
        rows = []
        for (activity, condition) in sorted(groups):
            vals = np.array(groups[(activity, condition)])
            rows.append(
                (activity, condition, float(vals.mean()), float(vals.std()), int(vals.size))
            )
        return rows

    def mean_eer(self, condition: str, activities=None) -> float:
        vals = [
            eer
            for (_, activity, cond), eer in self.entries.items()
            if cond == condition and (activities is None or activity in activities)
        ]
        return float(np.mean(vals))


def auth_probability_stats(
    model: DecisionForest, X: np.ndarray, condition: str, y_true=None
) -> ProbabilityStats:
    """Top-1 (predicted-class) probability stats for a binary auth model.

    The floor is 0.5 by construction: the predicted class of a two-class
    model is the argmax, so its probability can never fall below one half.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("auth_probability_stats needs a non-empty 2-d sample matrix")
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
