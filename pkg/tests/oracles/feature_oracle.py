#!/usr/bin/env python3
"""Straight-line reference computation of the per-window feature schema.

Pure-python loops, no numpy, independent of the package under test. Running
this file prints the expected 52-entry feature vector for the sine fixture;
the printed values are frozen into tests/test_ingest.py.
"""
import math

RATE_HZ = 20.0
N_SAMPLES = 200


def axis_features(vals, rate_hz=RATE_HZ):
    """10 normalized bins, mean, std, var, mad, avg seconds between peaks."""
    n = len(vals)
    lo = min(vals)
    hi = max(vals)
    bins = [0.0] * 10
    if hi > lo:
        width = (hi - lo) / 10.0
        for v in vals:
            b = int((v - lo) / width)
            if b > 9:
                b = 9
            bins[b] += 1.0
    else:
        bins[0] = float(n)
    bins = [b / n for b in bins]

    mean = sum(vals) / n
    var = sum((v - mean) ** 2 for v in vals) / n
    std = math.sqrt(var)
    mad = sum(abs(v - mean) for v in vals) / n

    thr = mean + std
    peaks = [
        i
        for i in range(1, n - 1)
        if vals[i] > vals[i - 1] and vals[i] > vals[i + 1] and vals[i] > thr
    ]
    if len(peaks) >= 2:
        gaps = [b - a for a, b in zip(peaks, peaks[1:])]
        peak_gap = (sum(gaps) / len(gaps)) / rate_hz
    else:
        peak_gap = 0.0

    return bins + [mean, std, var, mad, peak_gap]


def pearson(a, b):
    n = len(a)
    ma = sum(a) / n
    mb = sum(b) / n
    cov = sum((x - ma) * (y - mb) for x, y in zip(a, b)) / n
    sa = math.sqrt(sum((x - ma) ** 2 for x in a) / n)
    sb = math.sqrt(sum((y - mb) ** 2 for y in b) / n)
    if sa * sb == 0.0:
        return 0.0
    return cov / (sa * sb)


def cosine(a, b):
    na = math.sqrt(sum(x * x for x in a))
    nb = math.sqrt(sum(y * y for y in b))
    if na * nb == 0.0:
        return 0.0
    return sum(x * y for x, y in zip(a, b)) / (na * nb)


def window_features(xs, ys, zs, rate_hz=RATE_HZ):
    out = []
    for vals in (xs, ys, zs):
        out.extend(axis_features(vals, rate_hz))
    out.extend([pearson(xs, ys), pearson(xs, zs), pearson(ys, zs)])
    out.extend([cosine(xs, ys), cosine(xs, zs), cosine(ys, zs)])
    out.append(
        sum(math.sqrt(x * x + y * y + z * z) for x, y, z in zip(xs, ys, zs))
        / len(xs)
    )
    return out


def sine_fixture(n=N_SAMPLES, rate_hz=RATE_HZ):
    """Deterministic 200-sample tri-axial sine window used by the tests."""
    xs, ys, zs = [], [], []
    for i in range(n):
        t = i / rate_hz
        xs.append(3.0 * math.sin(2.0 * math.pi * 1.1 * t))
        ys.append(-2.0 + 1.5 * math.sin(2.0 * math.pi * 2.3 * t + 0.5))
        zs.append(9.8 + 0.8 * math.sin(2.0 * math.pi * 0.4 * t))
    return xs, ys, zs


if __name__ == "__main__":
    xs, ys, zs = sine_fixture()
    feats = window_features(xs, ys, zs)
    print(f"# {len(feats)} features")
    print("SINE_WINDOW_FEATURES = [")
    for v in feats:
        print(f"    {v!r},")
    print("]")
