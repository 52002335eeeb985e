import json

import pytest
from click.testing import CliRunner

from udgnn.cli import main

SPEC = {
    "n_nodes": 60,
    "n_classes": 3,
    "feature_dim": 6,
    "homophily": 0.8,
    "mean_degree": 6,
    "feature_signal": 2.0,
    "noise_std": 1.0,
    "seed": 17,
}
MODEL = {"conv_kind": "GCN", "skip_kind": "Drive", "with_ffn": True, "depth": 2, "hidden_dim": 8}
TRAIN = {"learning_rate": 0.01, "max_epochs": 5, "patience": 5, "seed": 0}


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def dataset(tmp_path, runner):
    spec_path = tmp_path / "spec.json"
    spec_path.write_text(json.dumps(SPEC))
    data_path = tmp_path / "data.json"
    result = runner.invoke(main, ["gen", "--spec", str(spec_path), "--out", str(data_path)])
    assert result.exit_code == 0, result.output
    return data_path


def write_configs(tmp_path):
    model_path = tmp_path / "model.json"
    model_path.write_text(json.dumps(MODEL))
    train_path = tmp_path / "train.json"
    train_path.write_text(json.dumps(TRAIN))
    return model_path, train_path


class TestGen:
    def test_reports_stats(self, tmp_path, runner, dataset):
        assert dataset.exists()

    def test_noisy_complete_generator(self, tmp_path, runner):
        spec_path = tmp_path / "spec.json"
        spec_path.write_text(json.dumps({**SPEC, "generator": "noisy_complete", "n_nodes": 20}))
        out = tmp_path / "noisy.json"
        result = runner.invoke(main, ["gen", "--spec", str(spec_path), "--out", str(out)])
        assert result.exit_code == 0, result.output
        assert "190 edges" in result.output  # complete graph on 20 nodes

    def test_unknown_generator_exit_2(self, tmp_path, runner):
        spec_path = tmp_path / "spec.json"
        spec_path.write_text(json.dumps({**SPEC, "generator": "erdos"}))
        result = runner.invoke(main, ["gen", "--spec", str(spec_path), "--out", str(tmp_path / "x")])
        assert result.exit_code == 2

    def test_missing_spec_file_exit_2(self, tmp_path, runner):
        result = runner.invoke(main, ["gen", "--spec", str(tmp_path / "nope.json"), "--out", str(tmp_path / "x")])
        assert result.exit_code == 2

    def test_infeasible_spec_exit_2(self, tmp_path, runner):
        spec_path = tmp_path / "spec.json"
        spec_path.write_text(json.dumps({**SPEC, "n_nodes": 10, "mean_degree": 20}))
        result = runner.invoke(main, ["gen", "--spec", str(spec_path), "--out", str(tmp_path / "x")])
        assert result.exit_code == 2
        assert "infeasible" in result.output


class TestTrain:
    def test_outputs(self, tmp_path, runner, dataset):
        model_path, train_path = write_configs(tmp_path)
        out = tmp_path / "run"
        result = runner.invoke(
            main,
            ["train", "--data", str(dataset), "--model", str(model_path),
             "--train", str(train_path), "--out", str(out), "--log-every", "2"],
        )
        assert result.exit_code == 0, result.output
        report = json.loads((out / "report.json").read_text())
        assert report["n_epochs"] == 5
        assert "wall_ms" not in report
        metrics = (out / "metrics.csv").read_text().strip().split("\n")
        assert metrics[0] == "epoch,train_loss,val_acc"
        assert len(metrics) == 6
        diag = (out / "diagnostics.csv").read_text().strip().split("\n")
        assert diag[0].startswith("epoch,layer,conv_ratio")
        for name in ("training_curves.png", "gate_dynamics.png", "diagnostics.png"):
            assert (out / "figures" / name).stat().st_size > 0

    def test_byte_deterministic_reports(self, tmp_path, runner, dataset):
        model_path, train_path = write_configs(tmp_path)
        blobs = []
        for name in ("a", "b"):
            out = tmp_path / name
            result = runner.invoke(
                main,
                ["train", "--data", str(dataset), "--model", str(model_path),
                 "--train", str(train_path), "--out", str(out)],
            )
            assert result.exit_code == 0, result.output
            blobs.append(
                (out / "report.json").read_bytes()
                + (out / "metrics.csv").read_bytes()
                + (out / "diagnostics.csv").read_bytes()
            )
        assert blobs[0] == blobs[1]

    def test_bad_model_spec_exit_2(self, tmp_path, runner, dataset):
        model_path = tmp_path / "model.json"
        model_path.write_text(json.dumps({**MODEL, "conv_kind": "Nope"}))
        train_path = tmp_path / "train.json"
        train_path.write_text(json.dumps(TRAIN))
        result = runner.invoke(
            main,
            ["train", "--data", str(dataset), "--model", str(model_path),
             "--train", str(train_path), "--out", str(tmp_path / "run")],
        )
        assert result.exit_code == 2


class TestSweep:
    def test_outputs(self, tmp_path, runner, dataset):
        train_path = tmp_path / "train.json"
        train_path.write_text(json.dumps(TRAIN))
        out = tmp_path / "sweep"
        result = runner.invoke(
            main,
            ["sweep", "--data", str(dataset), "--variants", "gcn,gcn_drive",
             "--depths", "1,2", "--repeats", "2", "--out", str(out), "--train", str(train_path)],
        )
        assert result.exit_code == 0, result.output
        lines = (out / "sweep.csv").read_text().strip().split("\n")
        assert lines[0] == "variant,conv,depth,repeat,seed,val_acc,test_acc,best_epoch,wall_ms"
        assert len(lines) == 9
        assert (out / "depth_curves.png").stat().st_size > 0

    def test_unknown_variant_exit_2(self, tmp_path, runner, dataset):
        result = runner.invoke(
            main,
            ["sweep", "--data", str(dataset), "--variants", "resnet",
             "--depths", "1", "--out", str(tmp_path / "s")],
        )
        assert result.exit_code == 2

    def test_bad_depth_exit_2(self, tmp_path, runner, dataset):
        result = runner.invoke(
            main,
            ["sweep", "--data", str(dataset), "--variants", "gcn",
             "--depths", "1,two", "--out", str(tmp_path / "s")],
        )
        assert result.exit_code == 2


class TestVerify:
    def test_theorem1_passes(self, runner):
        result = runner.invoke(main, ["verify", "--theorem", "1", "--trials", "8"])
        assert result.exit_code == 0, result.output
        assert "max deviation" in result.output

    def test_theorem2_passes(self, runner):
        result = runner.invoke(main, ["verify", "--theorem", "2", "--trials", "8"])
        assert result.exit_code == 0, result.output

    def test_corrupt_exit_1(self, runner):
        result = runner.invoke(main, ["verify", "--theorem", "1", "--trials", "4", "--corrupt"])
        assert result.exit_code == 1
        assert "FAIL" in result.output


class TestPlot:
    def test_svg_from_sweep_csv(self, tmp_path, runner, dataset):
        train_path = tmp_path / "train.json"
        train_path.write_text(json.dumps(TRAIN))
        out = tmp_path / "sweep"
        runner.invoke(
            main,
            ["sweep", "--data", str(dataset), "--variants", "gcn", "--depths", "1,2",
             "--out", str(out), "--train", str(train_path)],
        )
        svg_path = tmp_path / "curves.svg"
        result = runner.invoke(
            main, ["plot", "--csv", str(out / "sweep.csv"), "--out", str(svg_path)]
        )
        assert result.exit_code == 0, result.output
        text = svg_path.read_text()
        assert text.startswith("<?xml") and "<polyline" in text

    def test_missing_column_exit_2(self, tmp_path, runner):
        csv_path = tmp_path / "d.csv"
        csv_path.write_text("a,b\n1,2\n")
        result = runner.invoke(
            main, ["plot", "--csv", str(csv_path), "--out", str(tmp_path / "o.svg")]
        )
        assert result.exit_code == 2

    def test_empty_csv_exit_2(self, tmp_path, runner):
        csv_path = tmp_path / "d.csv"
        csv_path.write_text("depth,test_acc,variant\n")
        result = runner.invoke(
            main, ["plot", "--csv", str(csv_path), "--out", str(tmp_path / "o.svg")]
        )
        assert result.exit_code == 2
