"""End-to-end experiment plumbing shared by the CLI and the scripts.

Stage layout under the config's output_dir:

    models/id/<activity>_<mask>.model
    models/auth/<subject>_<activity>_<mask>.model
    thresholds.table
    adversarial/id_<mask>.csv (+ _sidecar.csv)
    adversarial/auth_<mask>.csv (+ _sidecar.csv)
    reports/...

Every stage recomputes its data splits from the config seed instead of
persisting indices: same config, same splits, byte-identical outputs.
"""
from __future__ import annotations

import csv
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .activities import mask_to_str
from .attack import AttackConfig, Normalizer, attack_dataset
from .authentication import (
    GENUINE,
    IMPOSTER,
    MIN_GENUINE_WINDOWS,
    AuthSplit,
    EerReport,
    auth_probability_stats,
    build_auth_split,
    genuine_probability,
    roc_and_eer,
    train_authentication,
)
from .config import RunConfig
from .errors import CalibrationError, MotioncredError, SplitError
from .folds import stratified_folds
from .forest import DecisionForest, train_forest
from .gate import GateStats, ThresholdTable, calibrate_threshold, gate_stats
from .identification import ADVERSARIAL, BENIGN, ProbabilityStats, probability_stats
from .ingest import FeatureTable
from .seeds import derive_seed


def log(message: str) -> None:
    print(message, flush=True)


def warn(message: str) -> None:
    print(f"warning: {message}", file=sys.stderr, flush=True)


# -- shared selection logic --------------------------------------------------


def eligible_cell(table: FeatureTable, activity: str, min_windows: int) -> FeatureTable | None:
    """Windows of one activity, restricted to subjects with enough of them.

    The corpus has gaps; subjects lacking data for an activity are dropped
    from that cell rather than failing the whole run.
    """
    sub = table.filter(activity=activity)
    if len(sub) == 0:
        return None
    keep = [
        s
        for s in np.unique(sub.subjects)
        if (sub.subjects == s).sum() >= min_windows
    ]
    if len(keep) < 2:
        return None
    return sub.filter(subjects=keep)


def holdout_indices(cell: FeatureTable, k: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic train/holdout split: fold 0 of a stratified k-fold."""
    fa = stratified_folds(cell.subjects, k=k, seed=seed)
    return fa.train_test(0)


def auth_subjects(cell: FeatureTable, cfg: RunConfig) -> list[int]:
    subjects = [
        int(s)
        for s in np.unique(cell.subjects)
        if (cell.subjects == s).sum() >= MIN_GENUINE_WINDOWS
    ]
    if cfg.subjects is not None:
        subjects = [s for s in subjects if s in cfg.subjects]
    return subjects


def auth_split_for(cell: FeatureTable, subject: int, activity: str,
                   mask: tuple[str, ...], cfg: RunConfig) -> AuthSplit:
    return build_auth_split(
        cell, subject, activity, seed=derive_seed(cfg.seed, "auth-split", subject, activity, mask_to_str(mask))
    )


def load_tables(cfg: RunConfig) -> dict[tuple[str, ...], FeatureTable]:
    tables = {}
    for mask in cfg.sensor_masks:
        path = cfg.features_path(mask)
        if not path.exists():
            raise MotioncredError(f"feature file {path} not found; run ingest or synth first")
        tables[mask] = FeatureTable.load(path)
    return tables


# -- train --------------------------------------------------------------------


def run_train(cfg: RunConfig) -> None:
    tables = load_tables(cfg)
    (cfg.models_dir() / "id").mkdir(parents=True, exist_ok=True)
    (cfg.models_dir() / "auth").mkdir(parents=True, exist_ok=True)

    for mask in cfg.sensor_masks:
        table = tables[mask]
        for activity in cfg.activities:
            cell = eligible_cell(table, activity, min_windows=cfg.cv_folds)
            if cell is None:
                warn(f"skipping id model {activity}/{mask_to_str(mask)}: not enough data")
                continue
            train_idx, _ = holdout_indices(
                cell, cfg.cv_folds, derive_seed(cfg.seed, "holdout", activity, mask_to_str(mask))
            )
            forest = train_forest(
                cell.X[train_idx],
                cell.subjects[train_idx],
                cfg.forest,
                seed=derive_seed(cfg.seed, "id-forest", activity, mask_to_str(mask)),
                n_jobs=cfg.n_jobs,
            )
            forest.save(cfg.id_model_path(activity, mask))
            log(
                f"id model {activity}/{mask_to_str(mask)}: "
                f"{len(train_idx)} train windows, {len(forest.classes)} subjects"
            )

            for subject in auth_subjects(cell, cfg):
                try:
                    split = auth_split_for(cell, subject, activity, mask, cfg)
                except SplitError as exc:
                    warn(f"auth {subject}/{activity}/{mask_to_str(mask)}: {exc}")
                    continue
                model = train_authentication(
                    split,
                    seed=derive_seed(cfg.seed, "auth-forest", subject, activity, mask_to_str(mask)),
                    params=cfg.forest,
                )
                model.save(cfg.auth_model_path(subject, activity, mask))
            log(
                f"auth models {activity}/{mask_to_str(mask)}: "
                f"{len(auth_subjects(cell, cfg))} subjects"
            )


# -- attack --------------------------------------------------------------------


def _write_sidecar(path: Path, header: list[str], rows: list[list]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _attack_cfg(cfg: RunConfig, X_train: np.ndarray, seed: int) -> tuple[AttackConfig, Normalizer]:
    attack_cfg = AttackConfig(
        h=cfg.attack.h,
        step_size=cfg.attack.step_size,
        max_iters=cfg.attack.max_iters,
        kappa=cfg.attack.kappa,
        coords_per_iter=cfg.attack.coords_per_iter,
        clip_min=X_train.min(axis=0),
        clip_max=X_train.max(axis=0),
        seed=seed,
    )
    return attack_cfg, Normalizer.fit(X_train)


def _cap(idx: np.ndarray, cap: int | None, seed: int) -> np.ndarray:
    if cap is None or idx.size <= cap:
        return idx
    rng = np.random.default_rng(seed)
    return idx[np.sort(rng.choice(idx.size, size=cap, replace=False))]


def run_attack(cfg: RunConfig) -> None:
    tables = load_tables(cfg)
    cfg.adversarial_dir().mkdir(parents=True, exist_ok=True)

    for mask in cfg.sensor_masks:
        table = tables[mask]
        mask_str = mask_to_str(mask)

        if "identification" in cfg.attack.targets:
            subjects_out, acts_out, widx_out, rows_out = [], [], [], []
            sidecar: list[list] = []
            for activity in cfg.activities:
                model_path = cfg.id_model_path(activity, mask)
                if not model_path.exists():
                    warn(f"attack: no id model for {activity}/{mask_str}; skipping")
                    continue
                model = DecisionForest.load(model_path)
                cell = eligible_cell(table, activity, min_windows=cfg.cv_folds)
                if cell is None:
                    continue
                train_idx, test_idx = holdout_indices(
                    cell, cfg.cv_folds, derive_seed(cfg.seed, "holdout", activity, mask_str)
                )
                test_idx = _cap(
                    test_idx, cfg.attack.sample_cap, derive_seed(cfg.seed, "cap", activity, mask_str)
                )
                class_to_idx = {int(c): i for i, c in enumerate(model.classes)}
                keep = np.array([int(s) in class_to_idx for s in cell.subjects[test_idx]])
                test_idx = test_idx[keep]
                y_idx = np.array([class_to_idx[int(s)] for s in cell.subjects[test_idx]])
                attack_cfg, norm = _attack_cfg(
                    cfg, cell.X[train_idx], derive_seed(cfg.seed, "attack-id", activity, mask_str)
                )
                _, results, success_rate, acc_before, acc_after = attack_dataset(
                    model.predict_proba_one, cell.X[test_idx], y_idx, attack_cfg, norm,
                    n_jobs=cfg.n_jobs,
                )
                log(
                    f"attack id {activity}/{mask_str}: accuracy {acc_before:.3f} -> "
                    f"{acc_after:.3f}, success rate {success_rate:.3f} over {len(results)} samples"
                )
                for row_i, r in enumerate(results):
                    subjects_out.append(int(cell.subjects[test_idx[row_i]]))
                    acts_out.append(activity)
                    widx_out.append(int(cell.window_indices[test_idx[row_i]]))
                    rows_out.append(r.perturbed)
                    sidecar.append(
                        [len(sidecar), int(r.success), r.queries, f"{r.final_loss:.6f}"]
                    )
            if rows_out:
                FeatureTable(
                    subjects=np.array(subjects_out),
                    activities=np.array(acts_out),
                    window_indices=np.array(widx_out),
                    mask=mask,
                    X=np.vstack(rows_out),
                    names=table.names,
                ).save(cfg.adversarial_id_path(mask))
                _write_sidecar(
                    cfg.adversarial_id_path(mask).with_name(
                        cfg.adversarial_id_path(mask).stem + "_sidecar.csv"
                    ),
                    ["sample_id", "success", "queries", "final_loss"],
                    sidecar,
                )

        if "authentication" in cfg.attack.targets:
            subjects_out, acts_out, widx_out, rows_out = [], [], [], []
            sidecar = []
            for activity in cfg.activities:
                cell = eligible_cell(table, activity, min_windows=cfg.cv_folds)
                if cell is None:
                    continue
                for subject in auth_subjects(cell, cfg):
                    model_path = cfg.auth_model_path(subject, activity, mask)
                    if not model_path.exists():
                        continue
                    model = DecisionForest.load(model_path)
                    try:
                        split = auth_split_for(cell, subject, activity, mask, cfg)
                    except SplitError:
                        continue
                    test_idx = _cap(
                        np.arange(split.X_test.shape[0]),
                        cfg.attack.sample_cap,
                        derive_seed(cfg.seed, "cap-auth", subject, activity, mask_str),
                    )
                    class_to_idx = {str(c): i for i, c in enumerate(model.classes)}
                    y_idx = np.array([class_to_idx[l] for l in split.y_test[test_idx]])
                    attack_cfg, norm = _attack_cfg(
                        cfg,
                        split.X_train,
                        derive_seed(cfg.seed, "attack-auth", subject, activity, mask_str),
                    )
                    _, results, success_rate, acc_before, acc_after = attack_dataset(
                        model.predict_proba_one, split.X_test[test_idx], y_idx, attack_cfg,
                        norm, n_jobs=cfg.n_jobs,
                    )
                    log(
                        f"attack auth {subject}/{activity}/{mask_str}: accuracy "
                        f"{acc_before:.3f} -> {acc_after:.3f} over {len(results)} samples"
                    )
                    for row_i, r in enumerate(results):
                        subjects_out.append(subject)
                        acts_out.append(activity)
                        widx_out.append(int(test_idx[row_i]))
                        rows_out.append(r.perturbed)
                        sidecar.append(
                            [
                                len(sidecar),
                                split.y_test[test_idx[row_i]],
                                int(r.success),
                                r.queries,
                                f"{r.final_loss:.6f}",
                            ]
                        )
            if rows_out:
                FeatureTable(
                    subjects=np.array(subjects_out),
                    activities=np.array(acts_out),
                    window_indices=np.array(widx_out),
                    mask=mask,
                    X=np.vstack(rows_out),
                    names=table.names,
                ).save(cfg.adversarial_auth_path(mask))
                _write_sidecar(
                    cfg.adversarial_auth_path(mask).with_name(
                        cfg.adversarial_auth_path(mask).stem + "_sidecar.csv"
                    ),
                    ["sample_id", "true_label", "success", "queries", "final_loss"],
                    sidecar,
                )


def read_sidecar(path: Path) -> list[dict]:
    with open(path, "r", newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


# -- calibrate ------------------------------------------------------------------


@dataclass
class CellStats:
    """Benign/adversarial probability stats for one model."""

    benign: ProbabilityStats
    adversarial: ProbabilityStats | None


def id_cell_stats(cfg: RunConfig, table: FeatureTable, adv: FeatureTable | None,
                  activity: str, mask: tuple[str, ...]) -> CellStats | None:
    model_path = cfg.id_model_path(activity, mask)
    if not model_path.exists():
        return None
    model = DecisionForest.load(model_path)
    cell = eligible_cell(table, activity, min_windows=cfg.cv_folds)
    if cell is None:
        return None
    _, test_idx = holdout_indices(
        cell, cfg.cv_folds, derive_seed(cfg.seed, "holdout", activity, mask_to_str(mask))
    )
    benign = probability_stats(model, cell.X[test_idx], BENIGN, y_true=cell.subjects[test_idx])
    if adv is None:
        return CellStats(benign=benign, adversarial=None)
    adv_cell = adv.filter(activity=activity)
    if len(adv_cell) == 0:
        return CellStats(benign=benign, adversarial=None)
    adversarial = probability_stats(model, adv_cell.X, ADVERSARIAL, y_true=adv_cell.subjects)
    return CellStats(benign=benign, adversarial=adversarial)


def run_calibrate(cfg: RunConfig) -> ThresholdTable:
    tables = load_tables(cfg)
    id_thresholds: dict[tuple[str, tuple[str, ...]], float] = {}
    auth_thresholds: dict[tuple[int, str, tuple[str, ...]], float] = {}
    failures = 0

    for mask in cfg.sensor_masks:
        table = tables[mask]
        mask_str = mask_to_str(mask)
        adv_path = cfg.adversarial_id_path(mask)
        adv = FeatureTable.load(adv_path) if adv_path.exists() else None

        for activity in cfg.activities:
            stats = id_cell_stats(cfg, table, adv, activity, mask)
            if stats is None or stats.adversarial is None:
                continue
            model = DecisionForest.load(cfg.id_model_path(activity, mask))
            try:
                tau = calibrate_threshold(
                    stats.benign,
                    stats.adversarial,
                    floor=1.0 / len(model.classes),
                    policy=cfg.threshold_policy,
                )
            except CalibrationError as exc:
                warn(f"calibrate id {activity}/{mask_str}: {exc}")
                failures += 1
                continue
            id_thresholds[(activity, mask)] = tau
            log(
                f"id threshold {activity}/{mask_str}: tau={tau:.4f} "
                f"(benign {stats.benign.mean:.4f}, adversarial {stats.adversarial.mean:.4f})"
            )

        adv_auth_path = cfg.adversarial_auth_path(mask)
        if not adv_auth_path.exists():
            continue
        adv_auth = FeatureTable.load(adv_auth_path)
        for activity in cfg.activities:
            cell = eligible_cell(table, activity, min_windows=cfg.cv_folds)
            if cell is None:
                continue
            for subject in auth_subjects(cell, cfg):
                model_path = cfg.auth_model_path(subject, activity, mask)
                if not model_path.exists():
                    continue
                rows = (adv_auth.subjects == subject) & (adv_auth.activities == activity)
                if not rows.any():
                    continue
                model = DecisionForest.load(model_path)
                try:
                    split = auth_split_for(cell, subject, activity, mask, cfg)
                except SplitError:
                    continue
                benign = auth_probability_stats(model, split.X_test, BENIGN, y_true=split.y_test)
                adversarial = auth_probability_stats(model, adv_auth.X[rows], ADVERSARIAL)
                try:
                    tau = calibrate_threshold(
                        benign, adversarial, floor=0.5, policy=cfg.threshold_policy
                    )
                except CalibrationError as exc:
                    warn(f"calibrate auth {subject}/{activity}/{mask_str}: {exc}")
                    failures += 1
                    continue
                auth_thresholds[(subject, activity, mask)] = tau

    if not id_thresholds and not auth_thresholds:
        raise CalibrationError(
            f"nothing calibrated ({failures} premise failures); check the attack stage output"
        )
    table_out = ThresholdTable(
        id_thresholds=id_thresholds,
        auth_thresholds=auth_thresholds,
        policy=cfg.threshold_policy,
    )
    table_out.save(cfg.thresholds_path())
    log(
        f"thresholds written to {cfg.thresholds_path()} "
        f"({len(id_thresholds)} id, {len(auth_thresholds)} auth, {failures} premise failures)"
    )
    return table_out


# -- evaluate -------------------------------------------------------------------


@dataclass
class EvaluationBundle:
    """Everything the report writer needs, computed once."""

    accuracy: "object"  # identification.AccuracyTable
    id_stats: dict[tuple[str, tuple[str, ...], str], ProbabilityStats]
    auth_stats: dict[tuple[str, tuple[str, ...], str], ProbabilityStats]
    eer_reports: dict[tuple[str, ...], EerReport]
    gate: dict[tuple[str, tuple[str, ...]], GateStats]
    misclassification: dict[tuple[str, tuple[str, ...], str], float]


def _merge_stats(parts: list[ProbabilityStats], condition: str) -> ProbabilityStats | None:
    if not parts:
        return None
    values = np.concatenate([p.values for p in parts])
    hist = np.sum([p.histogram for p in parts], axis=0)
    correct = None
    if all(p.correct is not None for p in parts):
        correct = np.concatenate([p.correct for p in parts])
    return ProbabilityStats(
        condition=condition,
        mean=float(values.mean()),
        std=float(values.std()),
        histogram=hist,
        n_samples=int(values.size),
        values=values,
        correct=correct,
    )


def run_evaluate(cfg: RunConfig, roc_dump: bool = False) -> EvaluationBundle:
    from .identification import evaluate_identification

    tables = load_tables(cfg)
    roc_dir = cfg.reports_dir() / "roc"
    if roc_dump:
        roc_dir.mkdir(parents=True, exist_ok=True)

    cv_tables = {}
    for mask in cfg.sensor_masks:
        parts = [
            eligible_cell(tables[mask], a, min_windows=cfg.cv_folds) for a in cfg.activities
        ]
        rows = [p for p in parts if p is not None]
        if not rows:
            continue
        cv_tables[mask] = FeatureTable(
            subjects=np.concatenate([p.subjects for p in rows]),
            activities=np.concatenate([p.activities for p in rows]),
            window_indices=np.concatenate([p.window_indices for p in rows]),
            mask=mask,
            X=np.vstack([p.X for p in rows]),
            names=tables[mask].names,
        )
    accuracy = evaluate_identification(
        cv_tables, cfg.activities, seed=cfg.seed, k=cfg.cv_folds,
        params=cfg.forest, n_jobs=cfg.n_jobs,
    )

    thresholds = (
        ThresholdTable.load(cfg.thresholds_path()) if cfg.thresholds_path().exists() else None
    )

    id_stats: dict[tuple[str, tuple[str, ...], str], ProbabilityStats] = {}
    auth_stats: dict[tuple[str, tuple[str, ...], str], ProbabilityStats] = {}
    eer_reports: dict[tuple[str, ...], EerReport] = {}
    gate: dict[tuple[str, tuple[str, ...]], GateStats] = {}
    misclassification: dict[tuple[str, tuple[str, ...], str], float] = {}

    for mask in cfg.sensor_masks:
        table = tables[mask]
        mask_str = mask_to_str(mask)
        adv_path = cfg.adversarial_id_path(mask)
        adv = FeatureTable.load(adv_path) if adv_path.exists() else None

        for activity in cfg.activities:
            stats = id_cell_stats(cfg, table, adv, activity, mask)
            if stats is None:
                continue
            id_stats[(activity, mask, BENIGN)] = stats.benign
            if stats.benign.correct is not None:
                misclassification[(activity, mask, BENIGN)] = float(
                    1.0 - stats.benign.correct.mean()
                )
            if stats.adversarial is not None:
                id_stats[(activity, mask, ADVERSARIAL)] = stats.adversarial
                if stats.adversarial.correct is not None:
                    misclassification[(activity, mask, ADVERSARIAL)] = float(
                        1.0 - stats.adversarial.correct.mean()
                    )
                if thresholds is not None and (activity, mask) in thresholds.id_thresholds:
                    model = DecisionForest.load(cfg.id_model_path(activity, mask))
                    adv_cell = adv.filter(activity=activity)
                    gate[(activity, mask)] = gate_stats(
                        model,
                        adv_cell.X,
                        adv_cell.subjects,
                        thresholds.id_tau(activity, mask),
                    )

        adv_auth_path = cfg.adversarial_auth_path(mask)
        adv_auth = FeatureTable.load(adv_auth_path) if adv_auth_path.exists() else None
        adv_sidecar = (
            read_sidecar(adv_auth_path.with_name(adv_auth_path.stem + "_sidecar.csv"))
            if adv_auth is not None
            else []
        )
        report = EerReport()
        auth_benign_parts: dict[str, list[ProbabilityStats]] = {}
        auth_adv_parts: dict[str, list[ProbabilityStats]] = {}
        for activity in cfg.activities:
            cell = eligible_cell(table, activity, min_windows=cfg.cv_folds)
            if cell is None:
                continue
            for subject in auth_subjects(cell, cfg):
                model_path = cfg.auth_model_path(subject, activity, mask)
                if not model_path.exists():
                    continue
                model = DecisionForest.load(model_path)
                try:
                    split = auth_split_for(cell, subject, activity, mask, cfg)
                except SplitError:
                    continue
                scores = genuine_probability(model, split.X_test)
                curve, eer = roc_and_eer(list(zip(scores, split.y_test == GENUINE)))
                report.add(subject, activity, BENIGN, eer)
                if roc_dump:
                    curve.save_csv(roc_dir / f"{subject}_{activity}_{mask_str}_{BENIGN}.csv")
                auth_benign_parts.setdefault(activity, []).append(
                    auth_probability_stats(model, split.X_test, BENIGN, y_true=split.y_test)
                )
                if adv_auth is None:
                    continue
                rows = np.nonzero(
                    (adv_auth.subjects == subject) & (adv_auth.activities == activity)
                )[0]
                if rows.size == 0:
                    continue
                labels = np.array([adv_sidecar[i]["true_label"] for i in rows])
                if (labels == GENUINE).all() or (labels == IMPOSTER).all():
                    continue
                adv_scores = genuine_probability(model, adv_auth.X[rows])
                adv_curve, adv_eer = roc_and_eer(list(zip(adv_scores, labels == GENUINE)))
                report.add(subject, activity, ADVERSARIAL, adv_eer)
                if roc_dump:
                    adv_curve.save_csv(
                        roc_dir / f"{subject}_{activity}_{mask_str}_{ADVERSARIAL}.csv"
                    )
                auth_adv_parts.setdefault(activity, []).append(
                    auth_probability_stats(model, adv_auth.X[rows], ADVERSARIAL, y_true=labels)
                )
        if report.entries:
            eer_reports[mask] = report
        for activity, parts in auth_benign_parts.items():
            merged = _merge_stats(parts, BENIGN)
            if merged is not None:
                auth_stats[(activity, mask, BENIGN)] = merged
        for activity, parts in auth_adv_parts.items():
            merged = _merge_stats(parts, ADVERSARIAL)
            if merged is not None:
                auth_stats[(activity, mask, ADVERSARIAL)] = merged

    return EvaluationBundle(
        accuracy=accuracy,
        id_stats=id_stats,
        auth_stats=auth_stats,
        eer_reports=eer_reports,
        gate=gate,
        misclassification=misclassification,
    )
