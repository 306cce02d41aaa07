"""Command-line driver: pipeline commands, exit codes, idempotent precompute."""

import json

import numpy as np
import pytest
from click.testing import CliRunner

from advscope.cli import main


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    """One tiny pipeline shared by the CLI tests."""
    root = tmp_path_factory.mktemp("cli")
    runner = CliRunner()
    for args in (
        ["gen-data", "--per-class", "30", "--seed", "3", "--out", "data.npz"],
        ["train", "--data", "data.npz", "--epochs", "3", "--seed", "3",
         "--out", "model.mnet"],
        ["attack", "--model", "model.mnet", "--data", "data.npz", "--out", "run"],
    ):
        result = runner.invoke(main, ["--workdir", str(root)] + args)
        assert result.exit_code == 0, result.output
    return root


def test_pipeline_artifacts(workdir):
    assert (workdir / "data.npz").exists()
    assert (workdir / "model.mnet").exists()
    manifest = json.loads((workdir / "run" / "manifest.json").read_text())
    assert manifest["attack"]["steps"] == 7
    assert abs(manifest["attack"]["eps"] - 8 / 255) < 1e-9
    assert manifest["pairs"], "attack produced no pairs"
    assert (workdir / "run" / "images.bin").exists()


def test_attack_flags_roundtrip_into_manifest(workdir):
    runner = CliRunner()
    result = runner.invoke(main, [
        "--workdir", str(workdir), "attack", "--model", "model.mnet",
        "--data", "data.npz", "--eps", "0.1", "--alpha", "0.03",
        "--steps", "3", "--seed", "9", "--out", "run2",
    ])
    assert result.exit_code == 0, result.output
    manifest = json.loads((workdir / "run2" / "manifest.json").read_text())
    assert manifest["attack"] == {
        "steps": 3, "eps": 0.1, "alpha": 0.03, "seed": 9, "random_start": True,
    }


def test_attack_eps_zero_warns_and_writes_empty_run(workdir):
    runner = CliRunner()
    result = runner.invoke(main, [
        "--workdir", str(workdir), "attack", "--model", "model.mnet",
        "--data", "data.npz", "--eps", "0", "--alpha", "0", "--out", "run0",
    ])
    assert result.exit_code == 0, result.output
    assert "empty" in result.output
    manifest = json.loads((workdir / "run0" / "manifest.json").read_text())
    assert manifest["pairs"] == []


def test_attack_clamps_alpha(workdir):
    runner = CliRunner()
    result = runner.invoke(main, [
        "--workdir", str(workdir), "attack", "--model", "model.mnet",
        "--data", "data.npz", "--eps", "0.01", "--alpha", "0.5", "--out", "run3",
    ])
    assert result.exit_code == 0, result.output
    assert "clamping" in result.output
    manifest = json.loads((workdir / "run3" / "manifest.json").read_text())
    assert manifest["attack"]["alpha"] == manifest["attack"]["eps"] == 0.01


def test_precompute_idempotent(workdir):
    runner = CliRunner()
    args = ["--workdir", str(workdir), "precompute", "--run", "run", "--s", "8"]
    first = runner.invoke(main, args)
    assert first.exit_code == 0, first.output
    second = runner.invoke(main, args)
    assert second.exit_code == 0, second.output
    assert "cache hits 100%" in second.output


def test_export_rf_and_dendrogram(workdir):
    runner = CliRunner()
    manifest = json.loads((workdir / "run" / "manifest.json").read_text())
    pair_id = manifest["pairs"][0]["id"]
    for what in ("rf", "dendrogram"):
        result = runner.invoke(main, [
            "--workdir", str(workdir), "export", "--run", "run",
            "--pair", str(pair_id), "--what", what, "--out", "exports",
        ])
        assert result.exit_code == 0, result.output
    assert list((workdir / "exports").glob("rf_*.png"))
    payload = json.loads(
        (workdir / "exports" / f"dendrogram_{pair_id}.json").read_text()
    )
    assert payload["leaf_count"] == 64


def test_exit_code_validation_error(workdir):
    runner = CliRunner()
    result = runner.invoke(main, [
        "--workdir", str(workdir), "attack", "--model", "model.mnet",
        "--data", "data.npz", "--eps", "2.0", "--out", "runx",
    ])
    assert result.exit_code == 2
    assert "error:" in result.output


def test_exit_code_io_error(workdir):
    runner = CliRunner()
    result = runner.invoke(main, [
        "--workdir", str(workdir), "train", "--data", "missing.npz",
    ])
    assert result.exit_code == 3
    assert "error:" in result.output


def test_serve_rejects_bad_addr(workdir):
    runner = CliRunner()
    result = runner.invoke(main, [
        "--workdir", str(workdir), "serve", "--run", "run", "--addr", "nonsense",
    ])
    assert result.exit_code == 2


def test_gen_data_deterministic(tmp_path):
    runner = CliRunner()
    for name in ("a.npz", "b.npz"):
        result = runner.invoke(main, [
            "--workdir", str(tmp_path), "gen-data", "--per-class", "5",
            "--seed", "11", "--out", name,
        ])
        assert result.exit_code == 0, result.output
    with np.load(tmp_path / "a.npz") as za, np.load(tmp_path / "b.npz") as zb:
        np.testing.assert_array_equal(za["images"], zb["images"])
