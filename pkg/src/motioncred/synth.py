"""Synthetic labeled datasets so everything downstream runs without the corpus.

Feature-space generator: per-subject isotropic Gaussian clusters whose means
are resampled until every pair is at least ``cluster_separation`` within-class
standard deviations apart. A raw-log generator is also provided so the ingest
stage itself can be driven end to end.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .activities import ALL_ACTIVITY_CODES, PHONE_ACCEL, normalize_mask
from .ingest import FeatureTable, SensorReading


@dataclass(frozen=True)
class SynthConfig:
    n_subjects: int
    n_windows_per_subject: int
    feature_dim: int
    cluster_separation: float
    seed: int

    def __post_init__(self):
        if self.n_subjects < 2:
            raise ValueError("need at least 2 subjects")
        if self.cluster_separation <= 0:
            raise ValueError("cluster_separation must be positive")
        if self.n_windows_per_subject < 1 or self.feature_dim < 1:
            raise ValueError("n_windows_per_subject and feature_dim must be >= 1")


FIRST_SUBJECT_ID = 1600  # mirrors the corpus numbering


def _sample_means(rng: np.random.Generator, n: int, dim: int, min_dist: float) -> np.ndarray:
    scale = min_dist
    while True:
        means = rng.normal(0.0, scale, size=(n, dim))
        diffs = means[:, None, :] - means[None, :, :]
        dist = np.sqrt((diffs**2).sum(axis=2))
        dist[np.diag_indices(n)] = np.inf
        if dist.min() >= min_dist:
            return means
        scale *= 1.5


def synth_generate(
    cfg: SynthConfig,
    activity: str = "A",
    mask=(PHONE_ACCEL,),
) -> FeatureTable:
    """Draw a per-subject Gaussian-cluster dataset (within-class std = 1)."""
    mask = normalize_mask(mask)
    rng = np.random.default_rng(cfg.seed)
    means = _sample_means(rng, cfg.n_subjects, cfg.feature_dim, cfg.cluster_separation)
    subjects, windows, rows = [], [], []
    for i in range(cfg.n_subjects):
        sid = FIRST_SUBJECT_ID + i
        X = means[i] + rng.normal(0.0, 1.0, size=(cfg.n_windows_per_subject, cfg.feature_dim))
        for w in range(cfg.n_windows_per_subject):
            subjects.append(sid)
            windows.append(w)
            rows.append(X[w])
    names = [f"f{i}" for i in range(cfg.feature_dim)]
    return FeatureTable(
        subjects=np.array(subjects),
        activities=np.array([activity] * len(subjects)),
        window_indices=np.array(windows),
        mask=mask,
        X=np.vstack(rows),
        names=names,
    )


def synth_generate_multi(
    cfg: SynthConfig,
    activities,
    mask=(PHONE_ACCEL,),
) -> FeatureTable:
    """One independent cluster layout per activity, merged into one table."""
    tables = []
    for k, act in enumerate(activities):
        sub_seed = int(np.random.SeedSequence([cfg.seed, k]).generate_state(1)[0])
        sub = SynthConfig(
            cfg.n_subjects,
            cfg.n_windows_per_subject,
            cfg.feature_dim,
            cfg.cluster_separation,
            sub_seed,
        )
        tables.append(synth_generate(sub, activity=act, mask=mask))
    return FeatureTable(
        subjects=np.concatenate([t.subjects for t in tables]),
        activities=np.concatenate([t.activities for t in tables]),
        window_indices=np.concatenate([t.window_indices for t in tables]),
        mask=normalize_mask(mask),
        X=np.vstack([t.X for t in tables]),
        names=tables[0].names,
    )


def synth_raw_readings(
    n_subjects: int,
    activities=("A",),
    sources=(PHONE_ACCEL,),
    n_windows: int = 2,
    seed: int = 0,
    sample_rate_hz: float = 20.0,
    window_seconds: float = 10.0,
) -> list[SensorReading]:
    """Synthetic raw logs: per (subject, axis) offset plus a sinusoid.

    Output is plausible enough to drive parse/window/extract; no claim of
    class separability is made for features derived from it.
    """
    for act in activities:
        if act not in ALL_ACTIVITY_CODES:
            raise ValueError(f"unknown activity code {act!r}")
    rng = np.random.default_rng(seed)
    size = int(window_seconds * sample_rate_hz)
    step_ns = int(1e9 / sample_rate_hz)
    readings: list[SensorReading] = []
    for i in range(n_subjects):
        sid = FIRST_SUBJECT_ID + i
        for act in activities:
            for source in sources:
                offset = rng.uniform(-4.0, 4.0, size=3)
                amp = rng.uniform(0.5, 3.0, size=3)
                freq = rng.uniform(0.5, 3.0, size=3)
                phase = rng.uniform(0.0, 2 * np.pi, size=3)
                n = size * n_windows
                t = np.arange(n) / sample_rate_hz
                sig = offset[None, :] + amp[None, :] * np.sin(
                    2 * np.pi * freq[None, :] * t[:, None] + phase[None, :]
                )
                sig = sig + rng.normal(0.0, 0.05, size=sig.shape)
                t0 = 1 + int(rng.integers(1, 10**6))
                for j in range(n):
                    readings.append(
                        SensorReading(
                            subject_id=sid,
                            activity=act,
                            timestamp=t0 + j * step_ns,
                            source=source,
                            x=float(sig[j, 0]),
                            y=float(sig[j, 1]),
                            z=float(sig[j, 2]),
                        )
                    )
    return readings
