"""Black-box adversarial perturbation of feature vectors by zeroth-order
coordinate descent.

The victim is reachable only through a query function mapping a feature
vector to a class-probability vector; nothing in this module touches model
internals. Gradients of the attack loss are estimated one coordinate at a
time with symmetric finite differences, and each chosen coordinate moves by
a fixed signed step. Forest victims are piecewise constant, so the
half-step h must be large enough to straddle split thresholds; attacks
therefore run in z-score-normalized feature space, with an occasional
seeded random kick when a whole sweep of coordinates reports zero gradient.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

QueryFn = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class AttackConfig:
    h: float = 0.2  # finite-difference half-step, normalized units
    step_size: float = 0.3
    max_iters: int = 200
    kappa: float = 0.0
    coords_per_iter: int = 16
    clip_min: np.ndarray | None = None  # per-feature, original units
    clip_max: np.ndarray | None = None
    seed: int = 0

    def __post_init__(self):
        if self.h <= 0:
            raise ValueError("h must be positive")
        if self.step_size <= 0:
            raise ValueError("step_size must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.kappa < 0:
            raise ValueError("kappa must be >= 0")
        if self.coords_per_iter < 1:
            raise ValueError("coords_per_iter must be >= 1")
        if (self.clip_min is None) != (self.clip_max is None):
            raise ValueError("clip_min and clip_max must be given together")
        if self.clip_min is not None and np.any(np.asarray(self.clip_min) > np.asarray(self.clip_max)):
            raise ValueError("clip_min must be <= clip_max per feature")

    def bounds_for(self, dim: int) -> tuple[np.ndarray, np.ndarray]:
        if self.clip_min is None:
            return np.full(dim, -np.inf), np.full(dim, np.inf)
        lo = np.asarray(self.clip_min, dtype=np.float64)
        hi = np.asarray(self.clip_max, dtype=np.float64)
        if lo.size != dim or hi.size != dim:
            raise ValueError(f"clip bounds have size {lo.size}, expected {dim}")
        return lo, hi


@dataclass(frozen=True)
class Normalizer:
    """Per-feature z-score transform fitted on training data."""

    mean: np.ndarray
    std: np.ndarray  # zero stds are replaced by 1

    @classmethod
    def fit(cls, X: np.ndarray) -> "Normalizer":
        X = np.asarray(X, dtype=np.float64)
        std = X.std(axis=0)
        std = np.where(std > 0, std, 1.0)
        return cls(mean=X.mean(axis=0), std=std)

    @classmethod
    def identity(cls, dim: int) -> "Normalizer":
        return cls(mean=np.zeros(dim), std=np.ones(dim))

    def transform(self, x: np.ndarray) -> np.ndarray:
        return (x - self.mean) / self.std

    def inverse(self, z: np.ndarray) -> np.ndarray:
        return z * self.std + self.mean


@dataclass
class AttackResult:
    original: np.ndarray
    perturbed: np.ndarray
    success: bool
    queries: int
    iterations_used: int
    final_loss: float


def attack_loss(proba: np.ndarray, true_class: int, kappa: float = 0.0) -> float:
    """Hinge on log-probabilities; minimizing drives misclassification.

    max(log p_true - max_{i != true} log p_i, -kappa). Laplace smoothing in
    the victim guarantees p > 0, so the logs are finite.
    """
    proba = np.asarray(proba, dtype=np.float64)
    if proba.size < 2:
        raise ValueError("need at least two classes")
    logp = np.log(proba)
    others = np.delete(logp, true_class)
    return float(max(logp[true_class] - others.max(), -kappa))


def estimate_gradient(
    f: Callable[[np.ndarray], float],
    x: np.ndarray,
    i: int,
    h: float,
    lo: np.ndarray | None = None,
    hi: np.ndarray | None = None,
) -> float:
    """Symmetric difference along coordinate i; exactly two evaluations.

    Probe points are clamped into [lo, hi] when bounds are given; the
    divisor stays 2h regardless.
    """
    xp = x.copy()
    xm = x.copy()
    xp[i] = x[i] + h
    xm[i] = x[i] - h
    if lo is not None:
        xp[i] = min(max(xp[i], lo[i]), hi[i])
        xm[i] = min(max(xm[i], lo[i]), hi[i])
    return (f(xp) - f(xm)) / (2.0 * h)


class _CoordinateSchedule:
    """Round-robin over a seeded permutation, reshuffled each epoch.

    Tracks whether the finished epoch saw any nonzero gradient so the
    caller can kick out of plateaus.
    """

    def __init__(self, dim: int, rng: np.random.Generator):
        self.dim = dim
        self.rng = rng
        self.perm = rng.permutation(dim)
        self.pos = 0
        self.epoch_nonzero = False

    def next_coord(self) -> tuple[int, bool]:
        """Returns (coordinate, epoch_just_ended_flat)."""
        if self.pos >= self.dim:
            flat = not self.epoch_nonzero
            self.perm = self.rng.permutation(self.dim)
            self.pos = 0
            self.epoch_nonzero = False
            return int(self.perm[self.pos]), flat
        c = int(self.perm[self.pos])
        return c, False

    def advance(self, saw_nonzero: bool) -> None:
        self.pos += 1
        if saw_nonzero:
            self.epoch_nonzero = True


def zoo_attack(
    query: QueryFn,
    x: np.ndarray,
    true_class: int,
    cfg: AttackConfig,
    normalizer: Normalizer | None = None,
) -> AttackResult:
    """Untargeted coordinate attack through the query interface only.

    Each iteration first evaluates the current point (this covers the
    original on iteration one, so an unimproved attack returns it), stops
    as soon as the loss reaches -kappa, then estimates coords_per_iter
    coordinate gradients and applies signed steps, clipping to bounds.
    """
    x = np.asarray(x, dtype=np.float64).copy()
    dim = x.size
    norm = normalizer if normalizer is not None else Normalizer.identity(dim)
    lo_raw, hi_raw = cfg.bounds_for(dim)
    lo = norm.transform(lo_raw)
    hi = norm.transform(hi_raw)

    rng = np.random.default_rng(cfg.seed)
    schedule = _CoordinateSchedule(dim, rng)

    z = np.clip(norm.transform(x), lo, hi)
    z_init = z.copy()
    queries = 0
    last_proba: np.ndarray | None = None

    def loss_at(zp: np.ndarray) -> float:
        nonlocal queries, last_proba
        queries += 1
        last_proba = query(norm.inverse(zp))
        return attack_loss(last_proba, true_class, cfg.kappa)

    best_z = z.copy()
    best_loss = np.inf
    best_proba: np.ndarray | None = None
    iterations_used = 0

    for it in range(1, cfg.max_iters + 1):
        iterations_used = it
        current = loss_at(z)
        if current < best_loss:
            best_loss = current
            best_z = z.copy()
            best_proba = last_proba
        if current <= -cfg.kappa:
            break

        moves: list[tuple[int, float]] = []
        for _ in range(cfg.coords_per_iter):
            coord, epoch_flat = schedule.next_coord()
            if epoch_flat:
                # Whole sweep saw zero gradient: seeded kick of size h on a
                # random coordinate, then continue from the fresh epoch.
                k = int(rng.integers(dim))
                z[k] = float(np.clip(z[k] + float(rng.choice([-cfg.h, cfg.h])), lo[k], hi[k]))
            g = estimate_gradient(loss_at, z, coord, cfg.h, lo, hi)
            schedule.advance(saw_nonzero=g != 0.0)
            if g != 0.0:
                moves.append((coord, g))
        for coord, g in moves:
            z[coord] = float(np.clip(z[coord] - cfg.step_size * np.sign(g), lo[coord], hi[coord]))

    if np.array_equal(best_z, z_init):
        # No improving move was found (or none was needed); hand back the
        # original point rather than its normalize/denormalize image.
        perturbed = np.clip(x, lo_raw, hi_raw)
    else:
        perturbed = np.clip(norm.inverse(best_z), lo_raw, hi_raw)
    success = best_proba is not None and int(np.argmax(best_proba)) != true_class
    return AttackResult(
        original=np.asarray(x, dtype=np.float64),
        perturbed=perturbed,
        success=success,
        queries=queries,
        iterations_used=iterations_used,
        final_loss=float(best_loss),
    )


def config_for_dataset(X: np.ndarray, seed: int = 0, **overrides) -> tuple[AttackConfig, Normalizer]:
    """Default attack setup for a dataset: observed min/max clip bounds and
    a z-score normalizer, both fitted on the given (training) matrix."""
    X = np.asarray(X, dtype=np.float64)
    cfg = AttackConfig(
        clip_min=X.min(axis=0),
        clip_max=X.max(axis=0),
        seed=seed,
        **overrides,
    )
    return cfg, Normalizer.fit(X)


def attack_dataset(
    query: QueryFn,
    X: np.ndarray,
    y_true_idx: np.ndarray,
    cfg: AttackConfig,
    normalizer: Normalizer | None = None,
    n_jobs: int = 1,
) -> tuple[np.ndarray, list[AttackResult], float, float, float]:
    """Attack every sample; returns (X_adv, results, success_rate,
    accuracy_before, accuracy_after).

    Per-sample RNG seeds derive from (cfg.seed, row), so results do not
    depend on scheduling. Samples the victim already misclassifies stop at
    the first evaluation and keep their original point, which is why the
    post-attack accuracy can never exceed the pre-attack one.
    """
    X = np.asarray(X, dtype=np.float64)
    y_true_idx = np.asarray(y_true_idx, dtype=np.int64)
    n = X.shape[0]
    if n == 0:
        raise ValueError("attack_dataset needs at least one sample")

    pred_before = np.array([int(np.argmax(query(X[i]))) for i in range(n)])
    accuracy_before = float((pred_before == y_true_idx).mean())

    def run(i: int) -> AttackResult:
        sample_seed = int(np.random.SeedSequence([cfg.seed, i]).generate_state(1)[0])
        sample_cfg = replace(cfg, seed=sample_seed)
        return zoo_attack(query, X[i], int(y_true_idx[i]), sample_cfg, normalizer)

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(run, range(n)))
    else:
        results = [run(i) for i in range(n)]

    X_adv = np.vstack([r.perturbed for r in results])
    pred_after = np.array([int(np.argmax(query(X_adv[i]))) for i in range(n)])
    accuracy_after = float((pred_after == y_true_idx).mean())
    success_rate = float(np.mean([r.success for r in results]))
    return X_adv, results, success_rate, accuracy_before, accuracy_after
