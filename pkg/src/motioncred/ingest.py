"""Raw sensor log parsing, windowing, feature extraction, and fusion.

The raw line format is the one the public wearable-sensor corpus ships:
``subject,activity_code,timestamp,x,y,z;`` with an optional trailing
semicolon. Windows are non-overlapping blocks of ``window_seconds *
sample_rate_hz`` consecutive readings of a single (subject, activity,
source) group; each window reduces to 52 statistical features per source.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Sequence, TextIO

import numpy as np

from .activities import SOURCES, is_activity_code, mask_to_str, normalize_mask
from .errors import FormatError, FusionError, IngestError

AXES = ("x", "y", "z")
N_BINS = 10
FEATURES_PER_SOURCE = 52

_SOURCE_PREFIX = {
    "phone-accel": "pa",
    "phone-gyro": "pg",
    "watch-accel": "wa",
    "watch-gyro": "wg",
}


@dataclass(frozen=True)
class SensorReading:
    """One timestamped tri-axial sample from one sensor source."""

    subject_id: int
    activity: str
    timestamp: int
    source: str
    x: float
    y: float
    z: float

    def __post_init__(self):
        if not is_activity_code(self.activity):
            raise ValueError(f"unknown activity code {self.activity!r}")
        if self.timestamp <= 0:
            raise ValueError("timestamp must be strictly positive")
        if self.source not in SOURCES:
            raise ValueError(f"unknown sensor source {self.source!r}")


@dataclass(frozen=True)
class RawWindow:
    """A contiguous block of readings from one (subject, activity, source)."""

    subject_id: int
    activity: str
    source: str
    window_index: int
    samples: np.ndarray  # (n, 3) float64, columns x/y/z in reading order
    sample_rate_hz: float = 20.0


@dataclass(frozen=True)
class FeatureVector:
    subject_id: int
    activity: str
    sensor_mask: tuple[str, ...]
    values: np.ndarray
    window_index: int


def parse_line(line: str, source: str) -> SensorReading | None:
    """One well-formed log line -> reading; anything else -> None."""
    line = line.strip()
    if line.endswith(";"):
        line = line[:-1]
    parts = line.split(",")
    if len(parts) != 6:
        return None
    try:
        subject = int(parts[0])
        activity = parts[1].strip()
        timestamp = int(parts[2])
        x, y, z = (float(p) for p in parts[3:6])
    except ValueError:
        return None
    if not is_activity_code(activity) or timestamp <= 0:
        return None
    if not all(math.isfinite(v) for v in (x, y, z)):
        return None
    return SensorReading(subject, activity, timestamp, source, x, y, z)


def parse_raw(stream: Iterable[str] | TextIO, source: str) -> tuple[list[SensorReading], int]:
    """Parse a line stream into readings.

    Malformed lines are skipped and counted. Raises IngestError if the
    stream cannot be read at all, FormatError if more than half of the
    non-empty lines are malformed (wrong file).
    """
    readings: list[SensorReading] = []
    malformed = 0
    total = 0
    try:
        for line in stream:
            if not line.strip():
                continue
            total += 1
            reading = parse_line(line, source)
            if reading is None:
                malformed += 1
            else:
                readings.append(reading)
    except (OSError, UnicodeDecodeError) as exc:
        raise IngestError(f"cannot read sensor stream: {exc}") from exc
    if total > 0 and malformed * 2 > total:
        raise FormatError(
            f"{malformed}/{total} lines malformed; this does not look like a raw sensor log"
        )
    return readings, malformed


def parse_raw_file(path: str | Path, source: str) -> tuple[list[SensorReading], int]:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return parse_raw(fh, source)
    except OSError as exc:
        raise IngestError(f"cannot open {path}: {exc}") from exc


def serialize_reading(r: SensorReading) -> str:
    return f"{r.subject_id},{r.activity},{r.timestamp},{r.x!r},{r.y!r},{r.z!r};"


def window(
    readings: Sequence[SensorReading],
    window_seconds: float = 10.0,
    sample_rate_hz: float = 20.0,
) -> list[RawWindow]:
    """Cut readings into non-overlapping fixed-size windows.

    Windows never span a (subject, activity, source) boundary; trailing
    readings that do not fill a window are discarded. Readings are ordered
    by timestamp within each group before cutting.
    """
    size = int(window_seconds * sample_rate_hz)
    if size < 2:
        raise ValueError("window must contain at least 2 samples")

    groups: dict[tuple[int, str, str], list[SensorReading]] = {}
    order: list[tuple[int, str, str]] = []
    for r in readings:
        key = (r.subject_id, r.activity, r.source)
        if key not in groups:
            groups[key] = []
            order.append(key)
        groups[key].append(r)

    windows: list[RawWindow] = []
    for key in order:
        group = sorted(groups[key], key=lambda r: r.timestamp)
        n_full = len(group) // size
        for w in range(n_full):
            block = group[w * size : (w + 1) * size]
            samples = np.array([[r.x, r.y, r.z] for r in block], dtype=np.float64)
            windows.append(
                RawWindow(
                    subject_id=key[0],
                    activity=key[1],
                    source=key[2],
                    window_index=w,
                    samples=samples,
                    sample_rate_hz=sample_rate_hz,
                )
            )
    return windows


def _axis_features(vals: np.ndarray, rate_hz: float) -> list[float]:
    n = vals.size
    lo = float(vals.min())
    hi = float(vals.max())
    bins = np.zeros(N_BINS)
    if hi > lo:
        width = (hi - lo) / N_BINS
        idx = np.minimum(((vals - lo) / width).astype(np.int64), N_BINS - 1)
        np.add.at(bins, idx, 1.0)
    else:
        bins[0] = float(n)
    bins /= n

    mean = float(vals.mean())
    var = float(((vals - mean) ** 2).mean())
    std = math.sqrt(var)
    mad = float(np.abs(vals - mean).mean())

    # Peaks: strict interior local maxima above mean + one std.
    thr = mean + std
    interior = vals[1:-1]
    is_peak = (interior > vals[:-2]) & (interior > vals[2:]) & (interior > thr)
    peak_idx = np.nonzero(is_peak)[0]
    if peak_idx.size >= 2:
        peak_gap = float(np.diff(peak_idx).mean()) / rate_hz
    else:
        peak_gap = 0.0

    return bins.tolist() + [mean, std, var, mad, peak_gap]


def _pearson(a: np.ndarray, b: np.ndarray) -> float:
    ma, mb = a.mean(), b.mean()
    sa = math.sqrt(float(((a - ma) ** 2).mean()))
    sb = math.sqrt(float(((b - mb) ** 2).mean()))
    if sa * sb == 0.0:
        return 0.0
    return float(((a - ma) * (b - mb)).mean()) / (sa * sb)


def _cosine(a: np.ndarray, b: np.ndarray) -> float:
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na * nb == 0.0:
        return 0.0
    return float(a @ b) / (na * nb)


def axis_feature_names(prefix: str = "") -> list[str]:
    names = []
    for axis in AXES:
        names.extend(f"{prefix}{axis}_bin{i}" for i in range(N_BINS))
        names.extend(
            f"{prefix}{axis}_{stat}" for stat in ("mean", "std", "var", "mad", "peak_gap")
        )
    for pair in ("xy", "xz", "yz"):
        names.append(f"{prefix}corr_{pair}")
    for pair in ("xy", "xz", "yz"):
        names.append(f"{prefix}cos_{pair}")
    names.append(f"{prefix}resultant_mean")
    return names


def feature_names(mask) -> list[str]:
    names = []
    for source in normalize_mask(mask):
        names.extend(axis_feature_names(_SOURCE_PREFIX[source] + "_"))
    return names


def extract_features(win: RawWindow) -> FeatureVector:
    """Reduce one raw window to the 52-entry per-source feature vector."""
    samples = win.samples
    if samples.ndim != 2 or samples.shape[1] != 3 or samples.shape[0] < 2:
        raise ValueError("window samples must be an (n>=2, 3) array")
    xs, ys, zs = samples[:, 0], samples[:, 1], samples[:, 2]
    feats: list[float] = []
    for vals in (xs, ys, zs):
        feats.extend(_axis_features(vals, win.sample_rate_hz))
    feats.extend([_pearson(xs, ys), _pearson(xs, zs), _pearson(ys, zs)])
    feats.extend([_cosine(xs, ys), _cosine(xs, zs), _cosine(ys, zs)])
    feats.append(float(np.sqrt((samples**2).sum(axis=1)).mean()))
    values = np.asarray(feats, dtype=np.float64)
    if not np.all(np.isfinite(values)):
        raise ValueError("non-finite feature produced; input window is corrupt")
    return FeatureVector(
        subject_id=win.subject_id,
        activity=win.activity,
        sensor_mask=(win.source,),
        values=values,
        window_index=win.window_index,
    )


def fuse(vectors: dict[str, FeatureVector], mask=None) -> FeatureVector:
    """Concatenate per-source vectors in fusion order, restricted to mask."""
    mask = normalize_mask(mask if mask is not None else vectors.keys())
    missing = [s for s in mask if s not in vectors]
    if missing:
        raise FusionError(f"missing source(s) for requested mask: {', '.join(missing)}")
    chosen = [vectors[s] for s in mask]
    first = chosen[0]
    for v in chosen[1:]:
        if (
            v.subject_id != first.subject_id
            or v.activity != first.activity
            or v.window_index != first.window_index
        ):
            raise FusionError("fused vectors must share subject, activity and window index")
    return FeatureVector(
        subject_id=first.subject_id,
        activity=first.activity,
        sensor_mask=mask,
        values=np.concatenate([v.values for v in chosen]),
        window_index=first.window_index,
    )


def fuse_dataset(vectors: Iterable[FeatureVector], mask) -> list[FeatureVector]:
    """Inner-join single-source vectors on (subject, activity, window_index).

    Windows missing any source named by the mask are dropped; the sensor
    streams run independently, so counts per source rarely line up.
    """
    mask = normalize_mask(mask)
    by_key: dict[tuple[int, str, int], dict[str, FeatureVector]] = {}
    for v in vectors:
        if len(v.sensor_mask) != 1:
            raise FusionError("fuse_dataset expects single-source vectors")
        src = v.sensor_mask[0]
        if src not in mask:
            continue
        by_key.setdefault((v.subject_id, v.activity, v.window_index), {})[src] = v
    fused = []
    for key in sorted(by_key):
        group = by_key[key]
        if all(s in group for s in mask):
            fused.append(fuse(group, mask))
    return fused


class FeatureTable:
    """Column-wise view of a uniform-mask feature dataset.

    This is the in-memory form of the canonical feature file: one row per
    window, all rows sharing the same sensor mask (hence the same feature
    dimension).
    """

    def __init__(
        self,
        subjects: np.ndarray,
        activities: np.ndarray,
        window_indices: np.ndarray,
        mask: tuple[str, ...],
        X: np.ndarray,
        names: list[str] | None = None,
    ):
        self.subjects = np.asarray(subjects, dtype=np.int64)
        self.activities = np.asarray(activities)
        self.window_indices = np.asarray(window_indices, dtype=np.int64)
        self.mask = normalize_mask(mask)
        self.X = np.asarray(X, dtype=np.float64)
        self.names = names if names is not None else feature_names(self.mask)
        n = len(self.subjects)
        if not (len(self.activities) == len(self.window_indices) == self.X.shape[0] == n):
            raise ValueError("column lengths disagree")
        if len(self.names) != self.X.shape[1]:
            raise ValueError("feature name count disagrees with matrix width")

    def __len__(self) -> int:
        return len(self.subjects)

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    @classmethod
    def from_vectors(cls, vectors: Sequence[FeatureVector]) -> "FeatureTable":
        if not vectors:
            raise ValueError("cannot build a table from zero vectors")
        mask = vectors[0].sensor_mask
        for v in vectors:
            if v.sensor_mask != mask:
                raise ValueError("all vectors in a table must share one sensor mask")
        return cls(
            subjects=np.array([v.subject_id for v in vectors]),
            activities=np.array([v.activity for v in vectors]),
            window_indices=np.array([v.window_index for v in vectors]),
            mask=mask,
            X=np.vstack([v.values for v in vectors]),
        )

    def vectors(self) -> Iterator[FeatureVector]:
        for i in range(len(self)):
            yield FeatureVector(
                subject_id=int(self.subjects[i]),
                activity=str(self.activities[i]),
                sensor_mask=self.mask,
                values=self.X[i].copy(),
                window_index=int(self.window_indices[i]),
            )

    def filter(self, activity: str | None = None, subjects=None) -> "FeatureTable":
        keep = np.ones(len(self), dtype=bool)
        if activity is not None:
            keep &= self.activities == activity
        if subjects is not None:
            keep &= np.isin(self.subjects, list(subjects))
        return FeatureTable(
            self.subjects[keep],
            self.activities[keep],
            self.window_indices[keep],
            self.mask,
            self.X[keep],
            self.names,
        )

    def save(self, path: str | Path) -> None:
        """Write the canonical feature file (header + CSV rows)."""
        mask_str = mask_to_str(self.mask)
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["subject", "activity", "window_index", "sensor_mask"] + self.names)
            for i in range(len(self)):
                writer.writerow(
                    [
                        int(self.subjects[i]),
                        str(self.activities[i]),
                        int(self.window_indices[i]),
                        mask_str,
                    ]
                    + [repr(float(v)) for v in self.X[i]]
                )

    @classmethod
    def load(cls, path: str | Path) -> "FeatureTable":
        with open(path, "r", newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or header[:4] != ["subject", "activity", "window_index", "sensor_mask"]:
                raise FormatError(f"{path} is not a canonical feature file")
            names = header[4:]
            subjects, acts, widx, rows = [], [], [], []
            mask: tuple[str, ...] | None = None
            for row in reader:
                if not row:
                    continue
                subjects.append(int(row[0]))
                acts.append(row[1])
                widx.append(int(row[2]))
                row_mask = tuple(row[3].split("+"))
                if mask is None:
                    mask = row_mask
                elif mask != row_mask:
                    raise FormatError(f"{path} mixes sensor masks; one mask per file")
                rows.append([float(v) for v in row[4:]])
            if mask is None:
                raise FormatError(f"{path} contains no data rows")
        return cls(
            subjects=np.array(subjects),
            activities=np.array(acts),
            window_indices=np.array(widx),
            mask=mask,
            X=np.array(rows, dtype=np.float64),
            names=names,
        )


def extract_dataset(
    readings: Sequence[SensorReading],
    masks: Sequence[tuple[str, ...]],
    window_seconds: float = 10.0,
    sample_rate_hz: float = 20.0,
) -> tuple[dict[tuple[str, ...], FeatureTable], dict[tuple[int, str, str], int]]:
    """Raw readings -> one FeatureTable per requested mask, plus window counts."""
    wins = window(readings, window_seconds, sample_rate_hz)
    counts: dict[tuple[int, str, str], int] = {}
    per_source: list[FeatureVector] = []
    for w in wins:
        counts[(w.subject_id, w.activity, w.source)] = (
            counts.get((w.subject_id, w.activity, w.source), 0) + 1
        )
        per_source.append(extract_features(w))
    tables: dict[tuple[str, ...], FeatureTable] = {}
    for mask in masks:
        mask = normalize_mask(mask)
        fused = fuse_dataset(per_source, mask)
        if fused:
            tables[mask] = FeatureTable.from_vectors(fused)
    return tables, counts
