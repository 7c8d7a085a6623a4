"""End-to-end CLI pipeline on synthetic data: no corpus, no network."""
import json
import hashlib

import numpy as np
import pytest

from motioncred.cli import main
from motioncred.ingest import FeatureTable


def run(argv):
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """synth -> train -> attack -> calibrate -> evaluate, once."""
    root = tmp_path_factory.mktemp("pipeline")
    data = root / "data"
    assert run(["synth", "--out", data, "--seed", "11", "--subjects", "5",
                "--windows", "15", "--dim", "6", "--separation", "8",
                "--activity", "A", "--activity", "K", "--mask", "phone-accel"]) == 0
    cfg = {
        "data_dir": str(data),
        "output_dir": str(root / "out"),
        "seed": 11,
        "sensor_masks": ["phone-accel"],
        "activities": ["A", "K"],
        "cv_folds": 3,
        "forest": {"n_trees": 15},
        "attack": {"h": 0.5, "step_size": 0.4, "max_iters": 60,
                   "coords_per_iter": 4, "sample_cap": 8},
    }
    cfg_path = root / "cfg.json"
    cfg_path.write_text(json.dumps(cfg))
    assert run(["train", "--config", cfg_path]) == 0
    assert run(["attack", "--config", cfg_path]) == 0
    assert run(["calibrate", "--config", cfg_path]) == 0
    assert run(["evaluate", "--config", cfg_path]) == 0
    return root, cfg_path


class TestPipelineArtifacts:
    def test_model_layout(self, workspace):
        root, _ = workspace
        assert (root / "out/models/id/A_phone-accel.model").exists()
        assert (root / "out/models/auth/1600_A_phone-accel.model").exists()
        assert (root / "out/thresholds.table").exists()

    def test_adversarial_files_and_sidecar(self, workspace):
        root, _ = workspace
        adv = FeatureTable.load(root / "out/adversarial/id_phone-accel.csv")
        assert len(adv) == 16  # 8 capped samples x 2 activities
        sidecar = (root / "out/adversarial/id_phone-accel_sidecar.csv").read_text().splitlines()
        assert sidecar[0] == "sample_id,success,queries,final_loss"
        assert len(sidecar) == len(adv) + 1

    def test_report_bundle_complete(self, workspace):
        root, _ = workspace
        reports = root / "out/reports"
        for name in ("accuracy_table.csv", "probability_stats.csv",
                     "eer_report.csv", "gate_stats.csv"):
            text = (reports / name).read_text().splitlines()
            assert len(text) >= 2  # header + data
        assert (reports / "id_probability_nonhand_phone-accel.svg").exists()
        assert (reports / "misclassification_error_phone-accel.svg").exists()
        assert (reports / "auth_probability_phone-accel.svg").exists()
        assert (reports / "auth_eer_phone-accel.svg").exists()

    def test_synthetic_accuracy_table_cells(self, workspace):
        root, _ = workspace
        lines = (root / "out/reports/accuracy_table.csv").read_text().splitlines()
        for line in lines[1:]:
            _, value = line.split(",")
            assert float(value) >= 0.99

    def test_four_decimal_serialization(self, workspace):
        root, _ = workspace
        lines = (root / "out/reports/gate_stats.csv").read_text().splitlines()
        for line in lines[1:]:
            pass_rate = line.split(",")[-1]
            assert len(pass_rate.split(".")[1]) == 4

    def test_evaluate_rerun_byte_identical(self, workspace):
        root, cfg_path = workspace
        reports = root / "out/reports"
        before = {p.name: hashlib.md5(p.read_bytes()).hexdigest()
                  for p in reports.iterdir() if p.is_file()}
        assert run(["evaluate", "--config", cfg_path]) == 0
        after = {p.name: hashlib.md5(p.read_bytes()).hexdigest()
                 for p in reports.iterdir() if p.is_file()}
        assert before == after

    def test_roc_dump_on_demand(self, workspace):
        root, cfg_path = workspace
        assert run(["evaluate", "--config", cfg_path, "--roc-dump"]) == 0
        roc_dir = root / "out/reports/roc"
        files = sorted(roc_dir.glob("*.csv"))
        assert files, "expected per-model ROC dumps"
        header = files[0].read_text().splitlines()[0]
        assert header == "threshold,far,frr"


class TestVerifyCommand:
    def carve(self, table, subject, activity, out_path, from_adv=None):
        mask = (table.subjects == subject) & (table.activities == activity)
        idx = np.nonzero(mask)[0][:1]
        FeatureTable(table.subjects[idx], table.activities[idx],
                     table.window_indices[idx], table.mask, table.X[idx],
                     table.names).save(out_path)

    def test_exit_codes(self, workspace, tmp_path):
        root, _ = workspace
        benign = FeatureTable.load(root / "data/features_phone-accel.csv")
        adv = FeatureTable.load(root / "out/adversarial/id_phone-accel.csv")
        benign_path = tmp_path / "benign.csv"
        adv_path = tmp_path / "adv.csv"
        self.carve(benign, 1600, "A", benign_path)
        self.carve(adv, 1600, "A", adv_path)
        base = ["verify", "--model-dir", root / "out/models",
                "--thresholds", root / "out/thresholds.table"]
        assert run(base + ["--sample", benign_path, "--claim", "1600"]) == 0
        assert run(base + ["--sample", adv_path, "--claim", "1600"]) == 10
        assert run(base + ["--sample", benign_path, "--claim", "1601"]) == 10
        # missing auth model for an unknown subject -> error, not a decision
        assert run(base + ["--sample", benign_path, "--claim", "9999"]) == 1

    def test_trace_printed(self, workspace, tmp_path, capsys):
        root, _ = workspace
        benign = FeatureTable.load(root / "data/features_phone-accel.csv")
        path = tmp_path / "b.csv"
        self.carve(benign, 1600, "A", path)
        run(["verify", "--model-dir", root / "out/models",
             "--thresholds", root / "out/thresholds.table",
             "--sample", path, "--claim", "1600"])
        out = capsys.readouterr().out
        assert "outcome: verified" in out
        assert "id_probability:" in out and "auth_threshold:" in out


class TestIngestCommand:
    def test_raw_synth_through_ingest(self, tmp_path, capsys):
        raw = tmp_path / "raw"
        out = tmp_path / "feat"
        assert run(["synth", "--out", raw, "--seed", "3", "--subjects", "2",
                    "--windows", "3", "--activity", "A", "--raw",
                    "--mask", "phone-accel"]) == 0
        assert run(["ingest", "--data-dir", raw, "--out", out,
                    "--mask", "phone-accel"]) == 0
        captured = capsys.readouterr().out
        assert "windows subject=1600 activity=A source=phone-accel: 3" in captured
        table = FeatureTable.load(out / "features_phone-accel.csv")
        assert len(table) == 6
        assert table.dim == 52

    def test_multi_source_fusion_through_ingest(self, tmp_path):
        raw = tmp_path / "raw"
        out = tmp_path / "feat"
        assert run(["synth", "--out", raw, "--seed", "4", "--subjects", "2",
                    "--windows", "2", "--activity", "A", "--raw",
                    "--mask", "all-accel"]) == 0
        assert run(["ingest", "--data-dir", raw, "--out", out,
                    "--mask", "all-accel"]) == 0
        table = FeatureTable.load(out / "features_phone-accel+watch-accel.csv")
        assert table.dim == 104
        assert len(table) == 4

    def test_empty_ingest_fails(self, tmp_path):
        raw = tmp_path / "empty"
        raw.mkdir()
        assert run(["ingest", "--data-dir", raw, "--out", tmp_path / "o",
                    "--mask", "phone-accel"]) == 1
