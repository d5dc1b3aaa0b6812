"""
Unit tests for the command-line entry point
"""

import csv
import json

import pytest

from main import build_parser, main
from tests.helpers import small_run_config


@pytest.fixture
def workspace(tmp_path, monkeypatch):
    """Isolated working directory with a run config for a small noisy sequence"""
    monkeypatch.chdir(tmp_path)
    for name in ("EPIVO_OUTPUT_ROOT", "EPIVO_WORKERS", "EPIVO_DENOISER_PATH", "EPIVO_LOG_LEVEL"):
        monkeypatch.delenv(name, raising=False)
    config = small_run_config(noise={"sigma_p": 0.5})
    path = tmp_path / "run.json"
    path.write_text(json.dumps(config.model_dump(mode="json"), indent=2))
    return tmp_path, path


def _simulate(root, config_path):
    sequence = root / "sequence"
    assert main(["simulate", "--config", str(config_path), "--output", str(sequence)]) == 0
    return sequence


def _run(config_path, sequence, output, *extra):
    argv = ["run", "--config", str(config_path), "--dataset", str(sequence), "--output", str(output)]
    return main([*argv, *extra])


class TestParser:
    """Tests for argument parsing"""

    def test_no_action_prints_help(self, capsys):
        """Without an action the help text is shown"""
        assert main([]) == 0
        assert "Available actions" in capsys.readouterr().out

    def test_pipeline_flags(self):
        """Solver, scorer and refinement flags parse"""
        args = build_parser().parse_args(
            ["run", "--solver", "ransac", "--scorer", "mp", "--toggle-refinement"]
        )
        assert args.solver == "ransac"
        assert args.scorer == "mp"
        assert args.toggle_refinement is True

    def test_unknown_solver_rejected(self):
        """argparse refuses solvers outside the closed set"""
        with pytest.raises(SystemExit):
            build_parser().parse_args(["run", "--solver", "lmeds"])


@pytest.mark.integration
class TestSimulateAndRun:
    """Tests for simulate followed by run"""

    def test_simulate_writes_sequence(self, workspace):
        """A sequence directory with a manifest and one file set per pair"""
        root, config_path = workspace
        sequence = _simulate(root, config_path)
        manifest = json.loads((sequence / "manifest.json").read_text())
        assert manifest["frames"] == 6
        assert len(manifest["pairs"]) == 5
        assert (sequence / "pairs" / "000000_000001.clean.corr").is_file()

    def test_simulate_is_deterministic(self, workspace):
        """The same seed writes byte-identical correspondences"""
        root, config_path = workspace
        first = _simulate(root, config_path)
        second = root / "again"
        assert main(["simulate", "--config", str(config_path), "--output", str(second)]) == 0
        name = "pairs/000002_000003.corr"
        assert (first / name).read_bytes() == (second / name).read_bytes()

    def test_run_writes_outputs(self, workspace):
        """Reports, trajectory files and manifest"""
        root, config_path = workspace
        sequence = _simulate(root, config_path)
        output = root / "run"
        assert _run(config_path, sequence, output) == 0
        for name in ("summary.txt", "metrics.json", "per_frame.csv", "trajectory.txt", "trajectory.csv"):
            assert (output / name).is_file()
        manifest = json.loads((output / "manifest.json").read_text())
        assert "metrics.json" in manifest["outputs"]
        assert manifest["seeds"] == {"seed": 0}
        metrics = json.loads((output / "metrics.json").read_text())
        assert metrics["frames"] == 6
        assert metrics["ate"] < 0.5

    def test_run_is_deterministic(self, workspace):
        """Two runs with the same seed write identical metrics"""
        root, config_path = workspace
        sequence = _simulate(root, config_path)
        assert _run(config_path, sequence, root / "a") == 0
        assert _run(config_path, sequence, root / "b") == 0
        assert (root / "a" / "metrics.json").read_bytes() == (root / "b" / "metrics.json").read_bytes()
        assert (root / "a" / "trajectory.txt").read_bytes() == (root / "b" / "trajectory.txt").read_bytes()

    def test_trajectory_csv_columns(self, workspace):
        """One row per frame with the fallback flag"""
        root, config_path = workspace
        sequence = _simulate(root, config_path)
        assert _run(config_path, sequence, root / "run") == 0
        with open(root / "run" / "trajectory.csv", newline="") as handle:
            rows = list(csv.DictReader(handle))
        assert len(rows) == 6
        assert rows[0]["tx"] == "0"
        assert {row["fallback"] for row in rows} <= {"true", "false"}

    def test_dump_intermediates(self, workspace):
        """Per-pair graph and hypothesis dumps on request"""
        root, _ = workspace
        config = small_run_config(noise={"sigma_p": 0.5}, dump_intermediates=True)
        config_path = root / "dump.json"
        config_path.write_text(json.dumps(config.model_dump(mode="json")))
        sequence = _simulate(root, config_path)
        assert _run(config_path, sequence, root / "run") == 0
        assert (root / "run" / "dumps" / "000000_000001.hyp").is_file()
        assert (root / "run" / "dumps" / "000000_000001.graph").is_file()


@pytest.mark.integration
class TestExitCodes:
    """Tests for error exit codes"""

    def test_missing_dataset_is_config_error(self, workspace):
        """No dataset path exits 2 before anything is written"""
        root, config_path = workspace
        output = root / "run"
        assert main(["run", "--config", str(config_path), "--output", str(output)]) == 2
        assert not output.exists()

    def test_nonexistent_dataset(self, workspace):
        """A dataset directory that does not exist exits 2"""
        root, config_path = workspace
        assert _run(config_path, root / "nowhere", root / "run") == 2
        assert not (root / "run").exists()

    def test_invalid_config(self, workspace):
        """Schema violations exit 2"""
        root, _ = workspace
        path = root / "bad.json"
        path.write_text(json.dumps({"pipeline": {"solver": "bogus"}}))
        assert main(["simulate", "--config", str(path), "--output", str(root / "s")]) == 2

    def test_malformed_sequence_is_data_error(self, workspace):
        """A corrupt pose file exits 1"""
        root, config_path = workspace
        sequence = _simulate(root, config_path)
        (sequence / "poses.txt").write_text("1 2 3\n")
        assert _run(config_path, sequence, root / "run") == 1

    def test_trained_denoiser_without_weights(self, workspace):
        """Refinement with a trained denoiser and no weights exits 2"""
        root, _ = workspace
        config = small_run_config(
            noise={"sigma_p": 0.5}, pipeline={"refinement": True, "denoiser": "trained"}
        )
        config_path = root / "trained.json"
        config_path.write_text(json.dumps(config.model_dump(mode="json")))
        sequence = _simulate(root, config_path)
        assert _run(config_path, sequence, root / "run") == 2


@pytest.mark.integration
class TestEvaluateAndPlot:
    """Tests for evaluate and plot on stored results"""

    def test_evaluate_reproduces_run_metrics(self, workspace):
        """Scoring the stored trajectory gives the run's ATE"""
        root, config_path = workspace
        sequence = _simulate(root, config_path)
        assert _run(config_path, sequence, root / "run") == 0
        argv = [
            "evaluate",
            "--config",
            str(config_path),
            "--dataset",
            str(sequence),
            "--trajectory",
            str(root / "run" / "trajectory.txt"),
            "--output",
            str(root / "eval"),
        ]
        assert main(argv) == 0
        run_metrics = json.loads((root / "run" / "metrics.json").read_text())
        eval_metrics = json.loads((root / "eval" / "metrics.json").read_text())
        assert eval_metrics["ate"] == pytest.approx(run_metrics["ate"], rel=1e-6, abs=1e-9)

    def test_evaluate_pose_count_mismatch(self, workspace):
        """A trajectory of the wrong length exits 1"""
        root, config_path = workspace
        sequence = _simulate(root, config_path)
        trajectory = root / "short.txt"
        trajectory.write_text("1 0 0 0 0 1 0 0 0 0 1 0\n1 0 0 0 0 1 0 0 0 0 1 1\n")
        argv = ["evaluate", "--config", str(config_path), "--dataset", str(sequence)]
        argv += ["--trajectory", str(trajectory), "--output", str(root / "eval")]
        assert main(argv) == 1

    def test_plot_kind_from_cli(self, workspace):
        """--kind selects the rendered plots"""
        root, config_path = workspace
        sequence = _simulate(root, config_path)
        assert _run(config_path, sequence, root / "run") == 0
        argv = ["plot", "--config", str(config_path), "--trajectory", str(root / "run" / "trajectory.txt")]
        argv += ["--kind", "xz", "--output", str(root / "plots")]
        assert main(argv) == 0
        assert (root / "plots" / "xz.svg").is_file()
        assert not (root / "plots" / "trajectory3d.svg").exists()


@pytest.mark.slow
class TestLongActions:
    """Tests for compare and denoiser training"""

    def test_compare_table(self, workspace):
        """One row per pipeline variant"""
        root, config_path = workspace
        sequence = _simulate(root, config_path)
        argv = ["compare", "--config", str(config_path), "--dataset", str(sequence)]
        assert main([*argv, "--output", str(root / "compare")]) == 0
        with open(root / "compare" / "comparison.csv", newline="") as handle:
            rows = list(csv.DictReader(handle))
        assert [row["variant"] for row in rows] == [
            "matcher+ransac",
            "matcher+refine+ransac",
            "matcher+refine+graph+svd",
        ]

    def test_train_then_run_with_weights(self, workspace, monkeypatch):
        """Trained weights are picked up through EPIVO_DENOISER_PATH"""
        root, config_path = workspace
        sequence = _simulate(root, config_path)
        argv = ["train-denoiser", "--config", str(config_path), "--dataset", str(sequence)]
        assert main([*argv, "--output", str(root / "train")]) == 0
        weights = root / "train" / "denoiser.weights"
        assert weights.is_file()
        assert (root / "train" / "loss_trace.csv").is_file()

        config = small_run_config(
            noise={"sigma_p": 0.5}, pipeline={"refinement": True, "denoiser": "trained"}
        )
        trained_path = root / "trained.json"
        trained_path.write_text(json.dumps(config.model_dump(mode="json")))
        monkeypatch.setenv("EPIVO_DENOISER_PATH", str(weights))
        assert _run(trained_path, sequence, root / "run") == 0
