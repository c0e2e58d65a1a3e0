"""
Tests for Model Commands

Covers:
- train (outputs, config file, overrides)
- generate
- complete (with and without a checkpoint)
"""
import json

import pytest
from typer.testing import CliRunner

from meshseq.cli import app
from meshseq.network.checkpoint import read_checkpoint, save_checkpoint


runner = CliRunner()


@pytest.fixture(scope="module")
def run(tmp_path_factory):
    """A 24-frame bending bar and a two-iteration training run on it."""
    root = tmp_path_factory.mktemp("model")
    data = root / "synth"
    result = runner.invoke(app, ["synth", "bend-bar", "--out", str(data), "--frames", "24", "--period", "12"])
    assert result.exit_code == 0, result.output

    config = root / "train.json"
    config.write_text(json.dumps({
        "conv_channels": [9, 4, 4],
        "latent_dim": 8,
        "lstm_layers": 1,
        "lstm_hidden": 8,
        "checkpoint_interval": 0,
        "test_fraction": 0.25,
    }))
    out = root / "train"
    result = runner.invoke(app, [
        "train", "--manifest", str(data / "manifest.json"), "--out", str(out),
        "--config", str(config), "--length", "4", "--batch", "1", "--iterations", "2",
    ])
    assert result.exit_code == 0, result.output
    return {"data": data, "train": out, "root": root, "output": result.output}


class TestTrain:
    """Tests for 'train' command."""

    def test_outputs(self, run):
        out = run["train"]
        assert (out / "model.msqc").exists()
        assert (out / "normalization.json").exists()
        assert "Final loss" in run["output"]

        lines = (out / "loss_log.csv").read_text().splitlines()
        assert lines[0] == "iteration,total,rec,bd,kl,l2"
        assert len(lines) == 3

    def test_resolved_config(self, run):
        config = json.loads((run["train"] / "config.json").read_text())

        assert config["iterations"] == 2
        assert config["sequence_length"] == 4
        assert config["conv_channels"] == [9, 4, 4]
        assert config["lstm_hidden"] == 8

    def test_checkpoint_metadata(self, run):
        data = read_checkpoint(run["train"] / "model.msqc")

        assert data.metadata["iteration"] == 2
        assert data.metadata["train_config"]["latent_dim"] == 8
        assert data.model.config.vertex_count == 402
        assert data.metadata["normalization"]["granularity"] == "vertex"

    def test_unknown_config_key(self, run, tmp_path):
        config = tmp_path / "bad.json"
        config.write_text(json.dumps({"dropout": 0.1}))
        result = runner.invoke(app, [
            "train", "--manifest", str(run["data"] / "manifest.json"),
            "--out", str(tmp_path / "out"), "--config", str(config),
        ])

        assert result.exit_code == 1
        assert "unknown config keys" in result.output


class TestGenerate:
    """Tests for 'generate' command."""

    def test_writes_requested_frames(self, run, tmp_path):
        data = run["data"]
        out = tmp_path / "generated"
        result = runner.invoke(app, [
            "generate", "--checkpoint", str(run["train"] / "model.msqc"),
            "--reference", str(data / "rest.obj"),
            "--initial", str(data / "frame_0000.obj"), "--initial", str(data / "frame_0001.obj"),
            "--frames", "3", "--out", str(out),
        ])

        assert result.exit_code == 0, result.output
        assert sorted(p.name for p in out.glob("*.obj")) == [
            "frame_0000.obj", "frame_0001.obj", "frame_0002.obj"
        ]

    def test_explicit_normalization_file(self, run, tmp_path):
        data = run["data"]
        result = runner.invoke(app, [
            "generate", "--checkpoint", str(run["train"] / "model.msqc"),
            "--reference", str(data / "rest.obj"), "--initial", str(data / "frame_0003.obj"),
            "--frames", "1", "--out", str(tmp_path / "g"),
            "--normalization", str(run["train"] / "normalization.json"),
        ])
        assert result.exit_code == 0, result.output

    def test_missing_checkpoint(self, run, tmp_path):
        data = run["data"]
        result = runner.invoke(app, [
            "generate", "--checkpoint", str(tmp_path / "absent.msqc"),
            "--reference", str(data / "rest.obj"), "--initial", str(data / "frame_0000.obj"),
            "--frames", "2", "--out", str(tmp_path / "g"),
        ])
        assert result.exit_code == 1


class TestComplete:
    """Tests for 'complete' command."""

    def _keyframes(self, run):
        data = run["data"]
        return [
            "--reference", str(data / "rest.obj"),
            "--keyframe", str(data / "frame_0000.obj"),
            "--keyframe", str(data / "frame_0005.obj"),
        ]

    def test_linear_needs_no_model(self, run, tmp_path):
        out = tmp_path / "linear"
        result = runner.invoke(
            app, ["complete", *self._keyframes(run), "--frames", "5", "--strategy", "baseline-linear", "--out", str(out)]
        )

        assert result.exit_code == 0, result.output
        assert len(list(out.glob("*.obj"))) == 5

    def test_bidirectional(self, run, tmp_path):
        out = tmp_path / "bidirectional"
        result = runner.invoke(app, [
            "complete", *self._keyframes(run), "--frames", "4",
            "--checkpoint", str(run["train"] / "model.msqc"), "--seed", "2", "--out", str(out),
        ])

        assert result.exit_code == 0, result.output
        assert len(list(out.glob("*.obj"))) == 4

    def test_model_strategy_without_checkpoint(self, run, tmp_path):
        result = runner.invoke(
            app, ["complete", *self._keyframes(run), "--frames", "4", "--out", str(tmp_path / "c")]
        )

        assert result.exit_code == 1
        assert "needs --checkpoint" in result.output

    def test_checkpoint_without_normalization(self, run, tmp_path):
        """Raw features never reach the model."""
        bare = tmp_path / "bare.msqc"
        save_checkpoint(read_checkpoint(run["train"] / "model.msqc").model, bare, {})

        result = runner.invoke(app, [
            "complete", *self._keyframes(run), "--frames", "4",
            "--checkpoint", str(bare), "--out", str(tmp_path / "c"),
        ])

        assert result.exit_code == 1
        assert "pass --normalization" in result.output
        assert not (tmp_path / "c").exists()

    def test_explicit_normalization_file(self, run, tmp_path):
        bare = tmp_path / "bare.msqc"
        save_checkpoint(read_checkpoint(run["train"] / "model.msqc").model, bare, {})

        result = runner.invoke(app, [
            "complete", *self._keyframes(run), "--frames", "4", "--checkpoint", str(bare),
            "--normalization", str(run["train"] / "normalization.json"), "--out", str(tmp_path / "c"),
        ])

        assert result.exit_code == 0, result.output
        assert len(list((tmp_path / "c").glob("*.obj"))) == 4

    def test_segment_count_mismatch(self, run, tmp_path):
        result = runner.invoke(app, [
            "complete", *self._keyframes(run), "--frames", "4", "--frames", "4",
            "--strategy", "baseline-linear", "--out", str(tmp_path / "c"),
        ])
        assert result.exit_code == 1
