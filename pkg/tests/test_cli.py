import json
import subprocess
import sys

import numpy as np
import pytest
from click.testing import CliRunner

from mritask.cli import main


@pytest.fixture
def runner():
    return CliRunner()


class TestMaskCommand:
    def test_prints_count_and_factor(self, runner):
        result = runner.invoke(main, ["mask", "--width", "320", "--k", "3"])
        assert result.exit_code == 0
        assert result.output.strip() == "sampled=118 effective=2.71"

    def test_invalid_k_is_usage_error(self, runner):
        result = runner.invoke(main, ["mask", "--width", "320", "--k", "0"])
        assert result.exit_code == 2

    def test_unknown_subcommand_exits_2(self):
        proc = subprocess.run(
            [sys.executable, "-m", "mritask.cli", "frobnicate"],
            capture_output=True, text=True,
        )
        assert proc.returncode == 2

    def test_exports(self, runner, tmp_path):
        out = tmp_path / "m"
        result = runner.invoke(
            main, ["mask", "--width", "32", "--k", "2", "--low", "4", "--out", str(out)]
        )
        assert result.exit_code == 0
        assert (out / "mask.txt").exists()
        assert (out / "mask.png").exists()
        assert (out / "run-config.json").exists()

    def test_idempotent_outputs(self, runner, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        for out in (a, b):
            runner.invoke(main, ["mask", "--width", "48", "--k", "3", "--out", str(out)])
        assert (a / "mask.txt").read_bytes() == (b / "mask.txt").read_bytes()
        assert (a / "mask.png").read_bytes() == (b / "mask.png").read_bytes()

    def test_out_env_var_fallback(self, runner, tmp_path, monkeypatch):
        monkeypatch.setenv("MRITASK_OUT", str(tmp_path))
        r = runner.invoke(main, ["make-phantoms", "--count", "1", "--height", "16",
                                 "--width", "16", "--coils", "1", "--seed", "1"])
        assert r.exit_code == 0, r.output
        assert (tmp_path / "phantoms" / "slice0000.mcks").exists()

    def test_missing_out_is_usage_error(self, runner, monkeypatch):
        monkeypatch.delenv("MRITASK_OUT", raising=False)
        r = runner.invoke(main, ["make-phantoms", "--count", "1", "--height", "16",
                                 "--width", "16", "--coils", "1"])
        assert r.exit_code == 2


@pytest.fixture(scope="module")
def workflow(tmp_path_factory):
    """make-phantoms -> make-dataset -> train -> evaluate artifacts."""
    root = tmp_path_factory.mktemp("flow")
    runner = CliRunner()
    r = runner.invoke(main, [
        "make-phantoms", "--count", "10", "--height", "32", "--width", "32",
        "--coils", "2", "--seed", "5", "--texture", "0.08", "--support", "0.45",
        "--out", str(root / "slices"),
    ])
    assert r.exit_code == 0, r.output
    r = runner.invoke(main, [
        "make-dataset", "--input", str(root / "slices"), "--k", "2", "--low", "4",
        "--out", str(root / "pairs"),
    ])
    assert r.exit_code == 0, r.output
    r = runner.invoke(main, [
        "train", "--pairs", str(root / "pairs" / "pairs.npz"), "--loss", "mse",
        "--epochs", "4", "--batch", "4", "--x", "2", "--depth", "1",
        "--dropout", "0.0", "--lr", "0.01", "--val-fraction", "0.2",
        "--seed", "3", "--out", str(root / "train"),
    ])
    assert r.exit_code == 0, r.output
    return root


class TestWorkflow:
    def test_dataset_contents(self, workflow):
        data = np.load(workflow / "pairs" / "pairs.npz")
        assert data["inputs"].shape == (10, 32, 32)
        assert data["targets"].shape == (10, 32, 32)
        assert data["inputs"].dtype == np.float32

    def test_train_artifacts(self, workflow):
        assert (workflow / "train" / "weights.unw").exists()
        history = (workflow / "train" / "history.csv").read_text().strip().split("\n")
        assert history[0] == "epoch,train_loss,val_loss"
        assert len(history) == 5
        assert (workflow / "train" / "loss.png").exists()
        config = json.loads((workflow / "train" / "run-config.json").read_text())
        assert config["command"] == "train"
        assert config["config"]["loss"] == "mse"

    def test_evaluate_zero_filled(self, workflow, runner, tmp_path):
        r = runner.invoke(main, [
            "evaluate", "--pairs", str(workflow / "pairs" / "pairs.npz"),
            "--condition", "zf-2x", "--out", str(tmp_path / "eval"),
        ])
        assert r.exit_code == 0, r.output
        assert "ssim=" in r.output and "nrmse=" in r.output
        lines = (tmp_path / "eval" / "metrics.csv").read_text().strip().split("\n")
        assert lines[0] == "condition,metric,mean,std,n"
        assert len(lines) == 3

    def test_evaluate_with_model(self, workflow, runner, tmp_path):
        r = runner.invoke(main, [
            "evaluate", "--pairs", str(workflow / "pairs" / "pairs.npz"),
            "--model", str(workflow / "train" / "weights.unw"),
            "--out", str(tmp_path / "eval2"),
        ])
        assert r.exit_code == 0, r.output

    def test_recon_single_slice(self, workflow, runner, tmp_path):
        slice_path = sorted((workflow / "slices").glob("*.mcks"))[0]
        r = runner.invoke(main, [
            "recon", "--input", str(slice_path), "--k", "3", "--low", "4",
            "--out", str(tmp_path / "recon"),
        ])
        assert r.exit_code == 0, r.output
        assert list((tmp_path / "recon").glob("*zf-3x.png"))

    def test_afc_build_and_synthetic_observer(self, workflow, runner, tmp_path):
        study = tmp_path / "study"
        r = runner.invoke(main, [
            "make-afc", "--input", str(workflow / "slices"), "--k", "2", "--low", "4",
            "--amplitude", "8", "--patch", "12", "--condition", "zf-2x",
            "--out", str(study),
        ])
        assert r.exit_code == 0, r.output
        manifest = json.loads((study / "afc" / "zf-2x" / "manifest.json").read_text())
        assert len(manifest["images"]) == 80
        r = runner.invoke(main, [
            "simulate-observer", "--data", str(study), "--condition", "zf-2x",
            "--n", "20", "--seed", "1",
        ])
        assert r.exit_code == 0, r.output
        assert "percent_correct=" in r.output
        r2 = runner.invoke(main, ["score-afc", "--data", str(study),
                                  "--out", str(tmp_path / "scores")])
        assert r2.exit_code == 0, r2.output
        assert "zf-2x" in r2.output
        assert (tmp_path / "scores" / "scores.csv").exists()

    def test_simulate_observer_deterministic(self, workflow, runner, tmp_path):
        study = tmp_path / "study2"
        runner.invoke(main, [
            "make-afc", "--input", str(workflow / "slices"), "--k", "3", "--low", "4",
            "--amplitude", "8", "--patch", "12", "--condition", "zf-3x",
            "--out", str(study),
        ])
        outputs = []
        for _ in range(2):
            r = runner.invoke(main, [
                "simulate-observer", "--data", str(study), "--condition", "zf-3x",
                "--n", "16", "--seed", "9",
            ])
            outputs.append(r.output)
        assert outputs[0] == outputs[1]

    def test_export_compare(self, workflow, runner, tmp_path):
        slice_path = sorted((workflow / "slices").glob("*.mcks"))[0]
        out_png = tmp_path / "compare.png"
        r = runner.invoke(main, [
            "export-compare", "--input", str(slice_path), "--cond", "1", "--cond", "2",
            "--low", "4", "--amplitude", "8", "--out", str(out_png),
        ])
        assert r.exit_code == 0, r.output
        assert out_png.exists()

    def test_export_compare_missing_model_names_condition(self, workflow, runner, tmp_path):
        slice_path = sorted((workflow / "slices").glob("*.mcks"))[0]
        r = runner.invoke(main, [
            "export-compare", "--input", str(slice_path),
            "--cond", "2:/nonexistent/w.unw", "--low", "4", "--amplitude", "8",
            "--out", str(tmp_path / "x.png"),
        ])
        assert r.exit_code == 1
        assert "missing model weights" in r.output

    def test_config_file_overlay(self, workflow, runner, tmp_path):
        config = tmp_path / "train.cfg"
        config.write_text("epochs=2\nloss=mse\nx=2\ndepth=1\ndropout=0.0\n")
        r = runner.invoke(main, [
            "train", "--pairs", str(workflow / "pairs" / "pairs.npz"),
            "--config", str(config), "--seed", "4", "--lr", "0.01",
            "--out", str(tmp_path / "t2"),
        ])
        assert r.exit_code == 0, r.output
        resolved = json.loads((tmp_path / "t2" / "run-config.json").read_text())
        assert resolved["config"]["epochs"] == "2"  # file value, flag unset
        assert resolved["config"]["seed"] == 4  # flag overrides
        history = (tmp_path / "t2" / "history.csv").read_text().strip().split("\n")
        assert len(history) == 3


class TestCvCommand:
    def test_cv_writes_table_and_tree(self, runner, tmp_path):
        root = tmp_path
        r = runner.invoke(main, [
            "make-phantoms", "--count", "5", "--height", "32", "--width", "32",
            "--coils", "2", "--seed", "6", "--texture", "0.08", "--support", "0.45",
            "--out", str(root / "slices"),
        ])
        assert r.exit_code == 0, r.output
        r = runner.invoke(main, [
            "cv", "--input", str(root / "slices"), "--losses", "mse", "--ks", "1,2",
            "--low", "4", "--folds", "5", "--epochs", "2", "--batch", "4",
            "--x", "2", "--depth", "1", "--dropout", "0.0", "--seed", "2",
            "--out", str(root / "cv"),
        ])
        assert r.exit_code == 0, r.output
        table = (root / "cv" / "table.txt").read_text()
        assert "1x & 1/0 & 0/0" in table.replace("  ", " ")
        assert (root / "cv" / "metrics.csv").exists()
        assert (root / "cv" / "mse" / "2x" / "fold0" / "weights.unw").exists()
        assert (root / "cv" / "metrics.png").exists()
