"""Deterministic seed derivation for named sub-experiments.

crc32 of the token path keeps derived seeds stable across platforms and
runs; SeedSequence decorrelates them.
"""
from __future__ import annotations

import zlib

import numpy as np


def derive_seed(master_seed: int, *tokens) -> int:
    path = "/".join(str(t) for t in tokens)
    tag = zlib.crc32(path.encode("utf-8"))
    return int(np.random.SeedSequence([master_seed, tag]).generate_state(1)[0])
