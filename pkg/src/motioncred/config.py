"""Run configuration: one JSON file, fully validated before any work starts.

Precedence: command-line flags > MOTIONCRED_* environment variables > the
config file > built-in defaults. Long training runs must not die late on a
typo, so unknown keys are rejected outright.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

from .activities import ALL_ACTIVITY_CODES, parse_mask
from .errors import ConfigurationError
from .forest import ForestParams
from .gate import MIDPOINT_POLICY, POLICIES

ENV_PREFIX = "MOTIONCRED_"

_TOP_KEYS = {
    "data_dir",
    "output_dir",
    "seed",
    "sensor_masks",
    "activities",
    "subjects",
    "threshold_policy",
    "cv_folds",
    "n_jobs",
    "forest",
    "attack",
}
_FOREST_KEYS = {"n_trees", "max_depth", "min_leaf", "features_per_split", "bootstrap"}
_ATTACK_KEYS = {
    "h",
    "step_size",
    "max_iters",
    "kappa",
    "coords_per_iter",
    "sample_cap",
    "targets",
}
_ATTACK_TARGETS = {"identification", "authentication"}


@dataclass(frozen=True)
class AttackSettings:
    h: float = 0.2
    step_size: float = 0.3
    max_iters: int = 200
    kappa: float = 0.0
    coords_per_iter: int = 16
    sample_cap: int | None = None  # attack at most this many samples per cell
    targets: tuple[str, ...] = ("identification", "authentication")


@dataclass(frozen=True)
class RunConfig:
    data_dir: Path
    output_dir: Path
    seed: int
    sensor_masks: tuple[tuple[str, ...], ...]
    activities: tuple[str, ...] = ALL_ACTIVITY_CODES
    subjects: tuple[int, ...] | None = None
    threshold_policy: str = MIDPOINT_POLICY
    cv_folds: int = 10
    n_jobs: int = 1
    forest: ForestParams = field(default_factory=ForestParams)
    attack: AttackSettings = field(default_factory=AttackSettings)

    # -- derived paths ------------------------------------------------------

    def features_path(self, mask: tuple[str, ...]) -> Path:
        return self.data_dir / f"features_{'+'.join(mask)}.csv"

    def models_dir(self) -> Path:
        return self.output_dir / "models"

    def id_model_path(self, activity: str, mask: tuple[str, ...]) -> Path:
        return self.models_dir() / "id" / f"{activity}_{'+'.join(mask)}.model"

    def auth_model_path(self, subject: int, activity: str, mask: tuple[str, ...]) -> Path:
        return self.models_dir() / "auth" / f"{subject}_{activity}_{'+'.join(mask)}.model"

    def thresholds_path(self) -> Path:
        return self.output_dir / "thresholds.table"

    def adversarial_dir(self) -> Path:
        return self.output_dir / "adversarial"

    def adversarial_id_path(self, mask: tuple[str, ...]) -> Path:
        return self.adversarial_dir() / f"id_{'+'.join(mask)}.csv"

    def adversarial_auth_path(self, mask: tuple[str, ...]) -> Path:
        return self.adversarial_dir() / f"auth_{'+'.join(mask)}.csv"

    def reports_dir(self) -> Path:
        return self.output_dir / "reports"


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise ConfigurationError(message)


def _check_keys(doc: dict, allowed: set[str], where: str) -> None:
    unknown = set(doc) - allowed
    _require(not unknown, f"unknown {where} key(s): {', '.join(sorted(unknown))}")


def _as_int(value, name: str) -> int:
    _require(isinstance(value, int) and not isinstance(value, bool), f"{name} must be an integer")
    return value


def load_config(
    path: str | Path,
    env: dict | None = None,
    overrides: dict | None = None,
) -> RunConfig:
    """Read, override, and validate a run configuration."""
    env = os.environ if env is None else env
    overrides = overrides or {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config {path} is not valid JSON: {exc}") from exc
    _require(isinstance(doc, dict), "config root must be a JSON object")
    _check_keys(doc, _TOP_KEYS, "config")

    for key in ("data_dir", "output_dir", "seed", "threshold_policy", "cv_folds", "n_jobs"):
        env_name = ENV_PREFIX + key.upper()
        if env_name in env:
            doc[key] = env[env_name]
    for key, value in overrides.items():
        if value is not None:
            doc[key] = value

    _require("seed" in doc, "seed is required (no wall-clock default)")
    seed = doc["seed"]
    if isinstance(seed, str):
        _require(seed.lstrip("-").isdigit(), "seed must be an integer")
        seed = int(seed)
    seed = _as_int(seed, "seed")
    _require(seed >= 0, "seed must be non-negative")

    _require("data_dir" in doc, "data_dir is required")
    _require("output_dir" in doc, "output_dir is required")
    data_dir = Path(str(doc["data_dir"]))
    output_dir = Path(str(doc["output_dir"]))
    _require(data_dir.exists(), f"data_dir {data_dir} does not exist")

    masks_raw = doc.get("sensor_masks", ["phone-accel"])
    _require(
        isinstance(masks_raw, list) and masks_raw and all(isinstance(m, str) for m in masks_raw),
        "sensor_masks must be a non-empty list of mask strings",
    )
    try:
        masks = tuple(parse_mask(m) for m in masks_raw)
    except ValueError as exc:
        raise ConfigurationError(str(exc)) from exc

    acts_raw = doc.get("activities", list(ALL_ACTIVITY_CODES))
    _require(
        isinstance(acts_raw, list) and acts_raw and all(isinstance(a, str) for a in acts_raw),
        "activities must be a non-empty list of activity codes",
    )
    bad = [a for a in acts_raw if a not in ALL_ACTIVITY_CODES]
    _require(not bad, f"unknown activity code(s): {', '.join(bad)}")

    subjects = doc.get("subjects")
    if subjects is not None:
        _require(
            isinstance(subjects, list) and all(isinstance(s, int) for s in subjects),
            "subjects must be a list of integers",
        )
        subjects = tuple(subjects)

    policy = doc.get("threshold_policy", MIDPOINT_POLICY)
    if not (isinstance(policy, str) and policy in POLICIES):
        raise ConfigurationError(
            f"threshold_policy must be one of {', '.join(POLICIES)}; got {policy!r}"
        )

    cv_folds = doc.get("cv_folds", 10)
    if isinstance(cv_folds, str):
        _require(cv_folds.isdigit(), "cv_folds must be an integer")
        cv_folds = int(cv_folds)
    cv_folds = _as_int(cv_folds, "cv_folds")
    _require(cv_folds >= 2, "cv_folds must be >= 2")

    n_jobs = doc.get("n_jobs", 1)
    if isinstance(n_jobs, str):
        _require(n_jobs.isdigit(), "n_jobs must be an integer")
        n_jobs = int(n_jobs)
    n_jobs = _as_int(n_jobs, "n_jobs")
    _require(n_jobs >= 1, "n_jobs must be >= 1")

    forest_doc = doc.get("forest", {})
    _require(isinstance(forest_doc, dict), "forest section must be an object")
    _check_keys(forest_doc, _FOREST_KEYS, "forest")
    try:
        forest = ForestParams(**forest_doc)
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(f"invalid forest params: {exc}") from exc

    attack_doc = doc.get("attack", {})
    _require(isinstance(attack_doc, dict), "attack section must be an object")
    _check_keys(attack_doc, _ATTACK_KEYS, "attack")
    targets = attack_doc.pop("targets", list(_ATTACK_TARGETS))
    _require(
        isinstance(targets, list) and targets and set(targets) <= _ATTACK_TARGETS,
        f"attack.targets must be a non-empty subset of {sorted(_ATTACK_TARGETS)}",
    )
    try:
        attack = AttackSettings(targets=tuple(sorted(set(targets))), **attack_doc)
    except TypeError as exc:
        raise ConfigurationError(f"invalid attack settings: {exc}") from exc
    _require(attack.h > 0, "attack.h must be positive")
    _require(attack.step_size > 0, "attack.step_size must be positive")
    _require(attack.max_iters >= 1, "attack.max_iters must be >= 1")
    _require(attack.kappa >= 0, "attack.kappa must be >= 0")
    _require(attack.coords_per_iter >= 1, "attack.coords_per_iter must be >= 1")
    if attack.sample_cap is not None:
        _require(
            isinstance(attack.sample_cap, int) and attack.sample_cap >= 1,
            "attack.sample_cap must be a positive integer or null",
        )

    return RunConfig(
        data_dir=data_dir,
        output_dir=output_dir,
        seed=seed,
        sensor_masks=masks,
        activities=tuple(acts_raw),
        subjects=subjects,
        threshold_policy=policy,
        cv_folds=cv_folds,
        n_jobs=n_jobs,
        forest=forest,
        attack=attack,
    )
