#!/usr/bin/env python3
"""Full pipeline demo on synthetic data: no dataset, no network.

Generates a six-activity synthetic world, trains identification and
authentication forests, attacks them, calibrates the trust thresholds, emits
the report bundle, and finishes with three verification calls (benign,
adversarial, wrong claim) to show the gate at work.

Usage:
    python scripts/run_synthetic_pipeline.py [--workdir DIR] [--seed N]
"""
import argparse
import json
import sys
from pathlib import Path

import numpy as np

from motioncred.cli import main as cli
from motioncred.ingest import FeatureTable


def carve_one(table_path: Path, subject: int, activity: str, out_path: Path) -> bool:
    table = FeatureTable.load(table_path)
    idx = np.nonzero((table.subjects == subject) & (table.activities == activity))[0][:1]
    if idx.size == 0:
        return False
    FeatureTable(table.subjects[idx], table.activities[idx], table.window_indices[idx],
                 table.mask, table.X[idx], table.names).save(out_path)
    return True


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--workdir", default="synthetic_run")
    parser.add_argument("--seed", type=int, default=42)
    args = parser.parse_args()

    work = Path(args.workdir)
    data = work / "data"
    work.mkdir(parents=True, exist_ok=True)

    steps = [
        ["synth", "--out", str(data), "--seed", str(args.seed),
         "--subjects", "8", "--windows", "30", "--dim", "10", "--separation", "8",
         "--mask", "phone-accel"],
    ]
    cfg = {
        "data_dir": str(data),
        "output_dir": str(work / "out"),
        "seed": args.seed,
        "sensor_masks": ["phone-accel"],
        "activities": ["A", "B", "F", "R", "K", "L"],
        "cv_folds": 5,
        "forest": {"n_trees": 40},
        "attack": {"h": 0.5, "step_size": 0.3, "max_iters": 120,
                   "coords_per_iter": 4, "sample_cap": 24},
    }
    cfg_path = work / "config.json"
    cfg_path.write_text(json.dumps(cfg, indent=1))
    steps += [
        ["train", "--config", str(cfg_path)],
        ["attack", "--config", str(cfg_path)],
        ["calibrate", "--config", str(cfg_path)],
        ["evaluate", "--config", str(cfg_path), "--roc-dump"],
    ]
    for step in steps:
        print(f"\n=== motioncred {' '.join(step[:1])} ===")
        code = cli(step)
        if code != 0:
            print(f"step {step[0]} failed with exit code {code}", file=sys.stderr)
            return code

    print("\n=== verification demo ===")
    benign = work / "benign_sample.csv"
    adv = work / "adversarial_sample.csv"
    carve_one(data / "features_phone-accel.csv", 1600, "A", benign)
    carve_one(work / "out/adversarial/id_phone-accel.csv", 1600, "A", adv)
    base = ["verify", "--model-dir", str(work / "out/models"),
            "--thresholds", str(work / "out/thresholds.table")]
    for label, sample, claim in (
        ("benign window, correct claim", benign, 1600),
        ("attacked window, correct claim", adv, 1600),
        ("benign window, wrong claim", benign, 1601),
    ):
        print(f"\n--- {label} ---")
        code = cli(base + ["--sample", str(sample), "--claim", str(claim)])
        print(f"exit code: {code}")

    print(f"\nReports are in {work / 'out' / 'reports'}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
