"""Command-line entry points.

    motioncred synth     --out DIR --seed N [...]      synthetic datasets
    motioncred ingest    --data-dir DIR --out DIR      raw logs -> feature files
    motioncred train     --config FILE [...]           train + persist models
    motioncred attack    --config FILE [...]           adversarial datasets
    motioncred calibrate --config FILE [...]           thresholds.table
    motioncred evaluate  --config FILE [...]           report bundle
    motioncred verify    --model-dir DIR --thresholds FILE --sample FILE --claim ID

verify exit codes: 0 = Verified, 10 = FallbackSecondFactor, 11 = Rejected,
1 = error (2 for usage errors).
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .activities import mask_to_str, parse_mask
from .config import load_config
from .errors import MotioncredError
from .forest import DecisionForest
from .gate import Outcome, ThresholdTable, verify
from .ingest import FeatureTable, extract_dataset, parse_raw_file, serialize_reading
from .pipeline import log, run_attack, run_calibrate, run_evaluate, run_train, warn
from .reports import write_report_bundle
from .synth import SynthConfig, synth_generate_multi, synth_raw_readings

VERIFY_EXIT = {
    Outcome.VERIFIED: 0,
    Outcome.FALLBACK_SECOND_FACTOR: 10,
    Outcome.REJECTED: 11,
}


def _add_config_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", required=True, help="JSON run configuration")
    p.add_argument("--seed", type=int, default=None, help="override config seed")
    p.add_argument("--mask", action="append", default=None,
                   help="override sensor masks (repeatable; alias or a+b list)")
    p.add_argument("--activity", action="append", default=None,
                   help="override activities (repeatable)")
    p.add_argument("--out", default=None, help="override output directory")


def _config_from_args(args) -> "RunConfig":
    overrides = {
        "seed": args.seed,
        "sensor_masks": args.mask,
        "activities": args.activity,
        "output_dir": args.out,
    }
    return load_config(args.config, overrides={k: v for k, v in overrides.items() if v is not None})


def cmd_synth(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    activities = args.activity or ["A", "B", "F", "R", "K", "L"]
    masks = [parse_mask(m) for m in (args.mask or ["phone-accel"])]
    if args.raw:
        for source in sorted({s for m in masks for s in m}):
            readings = synth_raw_readings(
                args.subjects,
                activities=activities,
                sources=(source,),
                n_windows=args.windows,
                seed=args.seed,
            )
            path = out / f"raw_{source}.txt"
            with open(path, "w", encoding="utf-8") as fh:
                for r in readings:
                    fh.write(serialize_reading(r) + "\n")
            log(f"wrote {len(readings)} readings to {path}")
        return 0
    cfg = SynthConfig(
        n_subjects=args.subjects,
        n_windows_per_subject=args.windows,
        feature_dim=args.dim,
        cluster_separation=args.separation,
        seed=args.seed,
    )
    for mask in masks:
        table = synth_generate_multi(cfg, activities, mask=mask)
        path = out / f"features_{mask_to_str(mask)}.csv"
        table.save(path)
        log(f"wrote {len(table)} synthetic windows to {path}")
    return 0


def cmd_ingest(args) -> int:
    data_dir = Path(args.data_dir)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    masks = [parse_mask(m) for m in (args.mask or ["phone-accel"])]
    needed = sorted({s for m in masks for s in m})

    readings = []
    for source in needed:
        device, kind = source.split("-")
        candidates = [
            *sorted((data_dir / device / kind).glob("*.txt")),
            *sorted(data_dir.glob(f"raw_{source}.txt")),
            *sorted(data_dir.glob(f"*_{kind}_{device}.txt")),
        ]
        if not candidates:
            warn(f"no raw files found for {source} under {data_dir}")
            continue
        total_malformed = 0
        for path in candidates:
            rs, malformed = parse_raw_file(path, source)
            readings.extend(rs)
            total_malformed += malformed
        log(f"{source}: {len(candidates)} file(s), {total_malformed} malformed line(s) skipped")

    tables, counts = extract_dataset(readings, masks)
    for (subject, activity, source) in sorted(counts):
        log(f"windows subject={subject} activity={activity} source={source}: "
            f"{counts[(subject, activity, source)]}")
    for mask, table in tables.items():
        path = out / f"features_{mask_to_str(mask)}.csv"
        table.save(path)
        log(f"wrote {len(table)} windows ({table.dim} features) to {path}")
    if not tables:
        warn("no feature tables produced")
        return 1
    return 0


def cmd_train(args) -> int:
    run_train(_config_from_args(args))
    return 0


def cmd_attack(args) -> int:
    run_attack(_config_from_args(args))
    return 0


def cmd_calibrate(args) -> int:
    run_calibrate(_config_from_args(args))
    return 0


def cmd_evaluate(args) -> int:
    cfg = _config_from_args(args)
    bundle = run_evaluate(cfg, roc_dump=args.roc_dump)
    for path in write_report_bundle(bundle, cfg):
        log(f"wrote {path}")
    return 0


def cmd_verify(args) -> int:
    model_dir = Path(args.model_dir)
    thresholds = ThresholdTable.load(args.thresholds)
    table = FeatureTable.load(args.sample)
    if not (0 <= args.row < len(table)):
        raise MotioncredError(f"--row {args.row} out of range for {len(table)} samples")
    sample = list(table.vectors())[args.row]

    id_models = {}
    id_path = model_dir / "id" / f"{sample.activity}_{mask_to_str(sample.sensor_mask)}.model"
    if id_path.exists():
        id_models[(sample.activity, sample.sensor_mask)] = DecisionForest.load(id_path)
    auth_models = {}
    auth_path = (
        model_dir / "auth"
        / f"{args.claim}_{sample.activity}_{mask_to_str(sample.sensor_mask)}.model"
    )
    if auth_path.exists():
        auth_models[(args.claim, sample.activity, sample.sensor_mask)] = DecisionForest.load(auth_path)

    decision = verify(sample, args.claim, id_models, auth_models, thresholds)
    t = decision.trace
    log(f"outcome: {decision.outcome.value}")
    log(f"claimed_subject: {t.claimed_subject}")
    log(f"predicted_subject: {t.predicted_subject}")
    log(f"id_probability: {t.id_probability:.4f}")
    log(f"id_threshold: {t.id_threshold:.4f}")
    log(f"step_reached: {t.step_reached}")
    if t.step_reached == 2:
        log(f"auth_genuine_probability: {t.auth_genuine_probability:.4f}")
        log(f"auth_threshold: {t.auth_threshold:.4f}")
    return VERIFY_EXIT[decision.outcome]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="motioncred",
        description="Motion-biometric verification toolkit: train, attack, defend.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate synthetic datasets")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--subjects", type=int, default=8)
    p.add_argument("--windows", type=int, default=40)
    p.add_argument("--dim", type=int, default=10)
    p.add_argument("--separation", type=float, default=8.0)
    p.add_argument("--activity", action="append", default=None,
                   help="activity codes (repeatable; default six discussion activities)")
    p.add_argument("--mask", action="append", default=None)
    p.add_argument("--raw", action="store_true", help="emit raw sensor logs instead of features")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("ingest", help="parse raw logs into canonical feature files")
    p.add_argument("--data-dir", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--mask", action="append", default=None)
    p.set_defaults(func=cmd_ingest)

    for name, func, help_text in (
        ("train", cmd_train, "train and persist identification + authentication models"),
        ("attack", cmd_attack, "generate adversarial datasets against persisted models"),
        ("calibrate", cmd_calibrate, "calibrate and persist the threshold table"),
        ("evaluate", cmd_evaluate, "produce the CSV + figure report bundle"),
    ):
        p = sub.add_parser(name, help=help_text)
        _add_config_args(p)
        if name == "evaluate":
            p.add_argument("--roc-dump", action="store_true",
                           help="also write one ROC CSV per authentication model")
        p.set_defaults(func=func)

    p = sub.add_parser("verify", help="run the two-step gate on one sample")
    p.add_argument("--model-dir", required=True)
    p.add_argument("--thresholds", required=True)
    p.add_argument("--sample", required=True, help="canonical feature file")
    p.add_argument("--claim", type=int, required=True, help="claimed subject id")
    p.add_argument("--row", type=int, default=0, help="row of the sample file to verify")
    p.set_defaults(func=cmd_verify)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except MotioncredError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
