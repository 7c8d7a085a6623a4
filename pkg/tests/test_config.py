import json

import pytest

from motioncred.config import load_config
from motioncred.errors import ConfigurationError


def write_cfg(tmp_path, **kw):
    doc = {
        "data_dir": str(tmp_path),
        "output_dir": str(tmp_path / "out"),
        "seed": 7,
        "sensor_masks": ["phone-accel"],
    }
    doc.update(kw)
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(doc))
    return path


def test_minimal_config_defaults(tmp_path):
    cfg = load_config(write_cfg(tmp_path), env={})
    assert cfg.seed == 7
    assert cfg.sensor_masks == (("phone-accel",),)
    assert len(cfg.activities) == 18
    assert cfg.cv_folds == 10
    assert cfg.forest.n_trees == 100
    assert cfg.attack.max_iters == 200
    assert cfg.threshold_policy == "midpoint"


def test_mask_aliases_expand(tmp_path):
    cfg = load_config(write_cfg(tmp_path, sensor_masks=["all-accel", "all"]), env={})
    assert cfg.sensor_masks[0] == ("phone-accel", "watch-accel")
    assert len(cfg.sensor_masks[1]) == 4


def test_unknown_top_level_key_rejected(tmp_path):
    with pytest.raises(ConfigurationError, match="unknown config key"):
        load_config(write_cfg(tmp_path, typo_key=1), env={})


def test_unknown_nested_key_rejected(tmp_path):
    with pytest.raises(ConfigurationError, match="unknown attack key"):
        load_config(write_cfg(tmp_path, attack={"stepsize": 0.1}), env={})


def test_missing_seed_rejected(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"data_dir": str(tmp_path), "output_dir": "o", "sensor_masks": ["all"]}))
    with pytest.raises(ConfigurationError, match="seed"):
        load_config(path, env={})


def test_missing_data_dir_rejected(tmp_path):
    with pytest.raises(ConfigurationError, match="does not exist"):
        load_config(write_cfg(tmp_path, data_dir=str(tmp_path / "nope")), env={})


def test_bad_activity_rejected(tmp_path):
    with pytest.raises(ConfigurationError, match="activity"):
        load_config(write_cfg(tmp_path, activities=["A", "N"]), env={})


def test_bad_policy_rejected(tmp_path):
    with pytest.raises(ConfigurationError, match="threshold_policy"):
        load_config(write_cfg(tmp_path, threshold_policy="mean"), env={})


def test_env_overrides(tmp_path):
    cfg = load_config(
        write_cfg(tmp_path),
        env={"MOTIONCRED_SEED": "99", "MOTIONCRED_N_JOBS": "3"},
    )
    assert cfg.seed == 99
    assert cfg.n_jobs == 3


def test_cli_overrides_beat_env(tmp_path):
    cfg = load_config(
        write_cfg(tmp_path),
        env={"MOTIONCRED_SEED": "99"},
        overrides={"seed": 123},
    )
    assert cfg.seed == 123


def test_forest_and_attack_sections(tmp_path):
    cfg = load_config(
        write_cfg(
            tmp_path,
            forest={"n_trees": 10, "max_depth": 4},
            attack={"h": 0.5, "max_iters": 50, "targets": ["identification"]},
        ),
        env={},
    )
    assert cfg.forest.n_trees == 10 and cfg.forest.max_depth == 4
    assert cfg.attack.h == 0.5 and cfg.attack.targets == ("identification",)


def test_invalid_json_rejected(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text("{nope")
    with pytest.raises(ConfigurationError, match="JSON"):
        load_config(path, env={})
