"""End-to-end tests for the command-line dispatcher."""

import json

import numpy as np
import pandas as pd
import pytest

from polarsep.cli.main import EXIT_DATA, EXIT_OK, EXIT_USAGE, cli_dispatch
from polarsep.io.tensor_file import read_tensor, write_tensor
from polarsep.services import separation as separation_service


def _metadata(directory):
    return json.loads((directory / "metadata.json").read_text())


@pytest.fixture
def synth_dir(tmp_path):
    out = tmp_path / "synth"
    code = cli_dispatch(
        ["synth", "--size", "32", "--theta-deg", "60", "--rho-t", "0", "--seed", "3", "--mosaic", "--out-dir", str(out)]
    )
    assert code == EXIT_OK
    return out


def _nan_objective(delta, M_bar, R_bar, cfg):
    return float("nan"), np.zeros_like(delta)


class TestSynth:
    def test_writes_triple(self, synth_dir):
        for name in ("M.pmrt", "R.pmrt", "T.pmrt", "M_mosaic.png", "metadata.json"):
            assert (synth_dir / name).exists()
        M, R, T = (read_tensor(synth_dir / f"{n}.pmrt") for n in "MRT")
        assert M.dtype == np.uint16
        assert M.shape == (4, 32, 32)
        diff = M.astype(np.int64) - R.astype(np.int64) - T.astype(np.int64)
        assert np.abs(diff).max() <= 1

    def test_metadata(self, synth_dir):
        meta = _metadata(synth_dir)
        assert meta["command"] == "synth"
        assert meta["status"] == "ok"
        assert meta["seed"] == 3
        assert meta["results"]["triples"][0]["rho_t"] == 0.0

    def test_batch(self, tmp_path):
        out = tmp_path / "batch"
        code = cli_dispatch(["synth", "--size", "16", "--count", "2", "--seed", "10", "--out-dir", str(out)])
        assert code == EXIT_OK
        seeds = [_metadata(out / f"triple_{i:04d}")["seed"] for i in range(2)]
        assert seeds == [10, 11]
        assert len(_metadata(out)["results"]["triples"]) == 2

    def test_bad_count_is_usage_error(self, tmp_path):
        assert cli_dispatch(["synth", "--count", "0", "--out-dir", str(tmp_path)]) == EXIT_USAGE
        meta = _metadata(tmp_path)
        assert meta["status"] == "usage_error"
        assert meta["error"].startswith("FlagError")

    @pytest.mark.parametrize("flag, value", [("--a", "2"), ("--b", "0"), ("--noise-sigma", "-1")])
    def test_out_of_range_weight_is_usage_error(self, tmp_path, flag, value):
        assert cli_dispatch(["synth", flag, value, "--size", "16", "--out-dir", str(tmp_path)]) == EXIT_USAGE
        assert _metadata(tmp_path)["status"] == "usage_error"


class TestPolarizationCommands:
    def test_demux_then_stokes(self, synth_dir, tmp_path):
        demux_dir = tmp_path / "demux"
        code = cli_dispatch(["demux", "--in", str(synth_dir / "M_mosaic.png"), "--out-dir", str(demux_dir)])
        assert code == EXIT_OK
        stack = read_tensor(demux_dir / "stack.pmrt")
        np.testing.assert_array_equal(stack, read_tensor(synth_dir / "M.pmrt"))
        assert (demux_dir / "channel_045.png").exists()

        stokes_dir = tmp_path / "stokes"
        code = cli_dispatch(
            ["stokes", "--in", str(demux_dir / "stack.pmrt"), "--features", "--out-dir", str(stokes_dir)]
        )
        assert code == EXIT_OK
        rho = read_tensor(stokes_dir / "rho.pmrt")
        assert rho.shape == (32, 32)
        assert 0.0 <= rho.min() and rho.max() <= 1.0
        assert read_tensor(stokes_dir / "features.pmrt").shape[0] == 8
        assert "mean_dop" in _metadata(stokes_dir)["results"]


class TestFresnelCurve:
    def test_csv(self, tmp_path):
        assert cli_dispatch(["fresnel-curve", "--out-dir", str(tmp_path)]) == EXIT_OK
        curve = pd.read_csv(tmp_path / "fresnel_curve.csv")
        assert list(curve.columns) == ["theta_deg", "rho_r", "rho_t"]
        assert len(curve) == 91
        assert _metadata(tmp_path)["results"]["brewster_deg"] == pytest.approx(59.53, abs=0.01)

    def test_plot(self, tmp_path):
        code = cli_dispatch(["fresnel-curve", "--samples", "19", "--plot", "dop.png", "--out-dir", str(tmp_path)])
        assert code == EXIT_OK
        assert (tmp_path / "dop.png").stat().st_size > 0
        assert "dop.png" in _metadata(tmp_path)["outputs"]

    def test_bad_index_is_usage_error(self, tmp_path):
        assert cli_dispatch(["fresnel-curve", "--n", "0.9", "--out-dir", str(tmp_path)]) == EXIT_USAGE


class TestCleanAndLinearity:
    def test_clean(self, synth_dir, tmp_path):
        out = tmp_path / "clean"
        code = cli_dispatch(
            [
                "clean",
                "--mixed",
                str(synth_dir / "M.pmrt"),
                "--reflection",
                str(synth_dir / "R.pmrt"),
                "--out-dir",
                str(out),
            ]
        )
        assert code == EXIT_OK
        T = read_tensor(out / "T.pmrt")
        assert T.min() >= 0
        np.testing.assert_allclose(T, read_tensor(synth_dir / "T.pmrt"), atol=1.0)
        assert _metadata(out)["results"]["verdict"]["reason"] in {"accept", "reject_ratio"}

    def test_demo_linearity(self, tmp_path):
        assert cli_dispatch(["demo-linearity", "--size", "32", "--out-dir", str(tmp_path)]) == EXIT_OK
        results = _metadata(tmp_path)["results"]
        assert results["raw_max"] <= 1.5
        assert results["gamma_mean"] > results["raw_mean"]


class TestSeparateAndCurve:
    def test_separate(self, synth_dir, tmp_path):
        out = tmp_path / "sep"
        code = cli_dispatch(
            [
                "separate",
                "--in",
                str(synth_dir / "M.pmrt"),
                "--max-iters",
                "20",
                "--pyramid",
                "2,4",
                "--out-dir",
                str(out),
            ]
        )
        assert code == EXIT_OK
        assert read_tensor(out / "R_hat.pmrt").shape == (4, 32, 32)
        assert read_tensor(out / "T_hat.pmrt").shape == (32, 32)
        trace = pd.read_csv(out / "trace.csv")
        assert list(trace.columns) == ["stage", "iteration", "objective"]
        for _, group in trace.groupby("stage"):
            assert (np.diff(group["objective"].to_numpy()) <= 1e-12).all()
        assert _metadata(out)["config"]["max_iters"] == 20

    def test_separate_batch(self, synth_dir, tmp_path):
        out = tmp_path / "sep"
        src = str(synth_dir / "M.pmrt")
        code = cli_dispatch(["separate", "--in", src, src, "--max-iters", "5", "--pyramid", "2", "--out-dir", str(out)])
        assert code == EXIT_OK
        assert (out / "0000_M" / "T_hat.pmrt").exists()
        assert _metadata(out / "0001_M")["status"] == "ok"

    def test_solver_error_records_partial_outputs(self, synth_dir, tmp_path, monkeypatch):
        monkeypatch.setattr(separation_service, "stage2_objective", _nan_objective)
        out = tmp_path / "sep"
        argv = ["separate", "--in", str(synth_dir / "M.pmrt"), "--max-iters", "5", "--pyramid", "2,4"]
        assert cli_dispatch(argv + ["--out-dir", str(out)]) == EXIT_DATA
        meta = _metadata(out)
        assert meta["status"] == "solver_error"
        assert meta["outputs"] == ["R_hat.pmrt", "T_hat.pmrt", "T_hat.png", "trace.csv"]
        for name in meta["outputs"]:
            assert (out / name).exists()

    def test_batch_solver_error_records_partial_outputs(self, synth_dir, tmp_path, monkeypatch):
        monkeypatch.setattr(separation_service, "stage2_objective", _nan_objective)
        out = tmp_path / "sep"
        src = str(synth_dir / "M.pmrt")
        code = cli_dispatch(["separate", "--in", src, src, "--max-iters", "5", "--pyramid", "2", "--out-dir", str(out)])
        assert code == EXIT_DATA
        item = _metadata(out / "0000_M")
        assert item["status"] == "solver_error"
        assert "T_hat.pmrt" in item["outputs"]

    def test_negative_weight_is_usage_error(self, synth_dir, tmp_path):
        argv = ["separate", "--in", str(synth_dir / "M.pmrt"), "--lambda-tv", "-1", "--out-dir", str(tmp_path)]
        assert cli_dispatch(argv) == EXIT_USAGE
        assert not (tmp_path / "T_hat.pmrt").exists()

    def test_alpha_outside_unit_interval_is_usage_error(self, synth_dir, tmp_path):
        argv = ["pncc-curve", "--r", str(synth_dir / "R.pmrt"), "--t", str(synth_dir / "T.pmrt"), "--alphas", "0.5,1.5"]
        assert cli_dispatch(argv + ["--out-dir", str(tmp_path)]) == EXIT_USAGE

    def test_pncc_curve(self, synth_dir, tmp_path):
        out = tmp_path / "curve"
        code = cli_dispatch(
            ["pncc-curve", "--r", str(synth_dir / "R.pmrt"), "--t", str(synth_dir / "T.pmrt"), "--out-dir", str(out)]
        )
        assert code == EXIT_OK
        curve = pd.read_csv(out / "pncc_curve.csv")
        assert list(curve.columns) == ["alpha", "pncc"]
        assert len(curve) == 21
        assert _metadata(out)["results"]["monotone_fraction"] >= 0.9


class TestDispatch:
    def test_unknown_command(self, tmp_path):
        assert cli_dispatch(["frobnicate"]) == EXIT_USAGE

    def test_missing_required_option(self, tmp_path):
        assert cli_dispatch(["clean", "--out-dir", str(tmp_path)]) == EXIT_USAGE

    def test_bad_pattern(self, tmp_path):
        argv = ["demux", "--in", "x.png", "--pattern", "0,45,90", "--out-dir", str(tmp_path)]
        assert cli_dispatch(argv) == EXIT_USAGE

    def test_bad_workers(self, tmp_path):
        assert cli_dispatch(["--workers", "0", "fresnel-curve", "--out-dir", str(tmp_path)]) == EXIT_USAGE

    def test_bad_environment(self, tmp_path, monkeypatch):
        monkeypatch.setenv("POLARSEP_WORKERS", "0")
        assert cli_dispatch(["fresnel-curve", "--out-dir", str(tmp_path)]) == EXIT_USAGE

    def test_malformed_input_writes_metadata(self, tmp_path):
        bad = tmp_path / "bad.pmrt"
        bad.write_bytes(b"PMRT\x01")
        out = tmp_path / "out"
        assert cli_dispatch(["separate", "--in", str(bad), "--out-dir", str(out)]) == EXIT_DATA
        meta = _metadata(out)
        assert meta["status"] == "error"
        assert meta["error"].startswith("FormatError")

    def test_wrong_stack_shape(self, tmp_path):
        path = tmp_path / "three.pmrt"
        write_tensor(path, np.zeros((3, 4, 4), dtype=np.uint16))
        assert cli_dispatch(["stokes", "--in", str(path), "--out-dir", str(tmp_path / "o")]) == EXIT_DATA

    def test_metrics_file(self, tmp_path):
        metrics = tmp_path / "metrics.prom"
        code = cli_dispatch(
            ["--metrics-file", str(metrics), "synth", "--size", "16", "--out-dir", str(tmp_path / "o")]
        )
        assert code == EXIT_OK
        assert "polarsep_pairs_cleaned_total" in metrics.read_text()
