import json
import math

import numpy as np
import pytest
from click.testing import CliRunner

from chiralpair import io
from chiralpair.cli import main

from test_timematch import make_comb


@pytest.fixture
def runner():
    return CliRunner()


def run_config(tmp_path, **overrides):
    doc = {
        "instrument": {
            "duration_s": 0.002,
            "pair_probability": 0.5,
            "seed": 5,
            **overrides,
        }
    }
    path = tmp_path / "config.json"
    path.write_text(json.dumps(doc))
    return str(path)


def simulate_into(runner, tmp_path, name="run", **overrides):
    out = tmp_path / name
    result = runner.invoke(main, [
        "simulate", "--preset", "qd1", "--config", run_config(tmp_path, **overrides),
        "--out-dir", str(out), "--reproducible",
    ])
    assert result.exit_code == 0, result.output
    return out


def test_simulate_writes_manifest_and_streams(runner, tmp_path):
    out = simulate_into(runner, tmp_path)
    manifest = io.read_json(out / "manifest.json")
    assert set(manifest["files"]) == {"XX@A", "XX@B", "X@A", "X@B"}
    assert "created_at" not in manifest  # --reproducible
    for channel, fname in manifest["files"].items():
        stream, header = io.read_timestamps(out / fname)
        assert stream.channel == channel
        assert header["params_hash"] == manifest["params_hash"]
        assert stream.times.size == manifest["n_events"][channel]
        assert stream.times.size > 0


def test_simulate_is_deterministic(runner, tmp_path):
    out1 = simulate_into(runner, tmp_path, "run1")
    out2 = simulate_into(runner, tmp_path, "run2")
    for f in sorted(p.name for p in out1.iterdir()):
        assert (out1 / f).read_text() == (out2 / f).read_text()


def test_simulate_rejects_unknown_config_key(runner, tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"instrument": {"detector_count": 4}}))
    result = runner.invoke(main, [
        "simulate", "--preset", "qd1", "--config", str(path),
        "--out-dir", str(tmp_path / "x"),
    ])
    assert result.exit_code == 1
    err = json.loads(result.stderr.strip().splitlines()[-1])
    assert err["error"] == "ConfigError"
    assert "detector_count" in err["message"]


def test_simulate_requires_parameters(runner, tmp_path):
    result = runner.invoke(main, ["simulate", "--out-dir", str(tmp_path)])
    assert result.exit_code == 1
    err = json.loads(result.stderr.strip().splitlines()[-1])
    assert err["error"] == "ConfigError"


def test_correlate_produces_histograms(runner, tmp_path):
    out = simulate_into(runner, tmp_path)
    result = runner.invoke(main, [
        "correlate", str(out), "--pairs", "AA,AB",
        "--bin-width", "4", "--window", "1000000",
    ])
    assert result.exit_code == 0, result.output
    for name in ("AA", "AB"):
        h = io.read_histogram(out / f"hist_{name}.csv")
        assert h.config == name
        assert h.tau_min_ps == -1000000
        assert h.counts.sum() > 0
    payload = json.loads(result.output.strip().splitlines()[-1])
    assert payload["histograms"] == {"AA": "hist_AA.csv", "AB": "hist_AB.csv"}


def test_align_command(runner, tmp_path):
    ref = make_comb(noise_seed=1)
    mov = make_comb(period_ps=13132.321269 * (1 + 5e-7), tau0_ps=37.0,
                    noise_seed=2)
    sib = make_comb(period_ps=13132.321269 * (1 + 5e-7), tau0_ps=37.0,
                    noise_seed=3)
    io.write_histogram(tmp_path / "ref.csv", ref)
    io.write_histogram(tmp_path / "mov.csv", mov)
    io.write_histogram(tmp_path / "sib.csv", sib)
    result = runner.invoke(main, [
        "align", str(tmp_path / "ref.csv"), str(tmp_path / "mov.csv"),
        "--out-dir", str(tmp_path), "--apply", str(tmp_path / "sib.csv"),
    ])
    assert result.exit_code == 0, result.output
    payload = json.loads(result.output.strip().splitlines()[-1])
    assert abs(payload["residual_lag_bins"]) < 1
    assert (tmp_path / "alignment.json").exists()
    aligned = io.read_histogram(tmp_path / "hist_aligned.csv")
    assert aligned.counts.sum() == pytest.approx(mov.counts.sum(), rel=1e-3)
    moved = io.read_histogram(tmp_path / "sib_aligned.csv")
    assert moved.counts.sum() == pytest.approx(sib.counts.sum(), rel=1e-3)


def test_fit_command_recovers_phase(runner, tmp_path):
    out = simulate_into(
        runner, tmp_path, duration_s=0.01,
        efficiency_xx_a=0.4, efficiency_xx_b=0.4,
        efficiency_x_a=0.4, efficiency_x_b=0.4,
    )
    result = runner.invoke(main, [
        "correlate", str(out), "--pairs", "AA,AB",
        "--bin-width", "4", "--window", "2000000",
    ])
    assert result.exit_code == 0, result.output
    result = runner.invoke(main, [
        "fit", str(out / "hist_AB.csv"), str(out / "hist_AA.csv"),
        "--gamma", "8.35", "--out-dir", str(out),
    ])
    assert result.exit_code == 0, result.output
    payload = json.loads(result.output.strip().splitlines()[-1])
    assert payload["phi_over_pi"] == pytest.approx(0.12, abs=0.03)
    assert payload["fss_ghz"] == pytest.approx(12.78, abs=0.3)
    assert (out / "fit_stage1.json").exists()
    assert (out / "fit_stage2.json").exists()
    overlay = np.loadtxt(out / "overlay_stage2.csv", delimiter=",", skiprows=1)
    assert overlay.shape[1] == 3

    # report aggregates the fit and backs out the reflection-free phase
    result = runner.invoke(main, ["report", str(out), "--reflectance", "0.3"])
    assert result.exit_code == 0, result.output
    report = io.read_json(out / "report.json")
    assert report["phase_backout"]["ideal_phi_over_pi"] == pytest.approx(0.37, abs=0.05)


def test_entanglement_command(runner, tmp_path):
    result = runner.invoke(main, [
        "entanglement", "--preset", "qd1", "--out-dir", str(tmp_path),
        "--tau-max", "0.12", "--points", "41",
    ])
    assert result.exit_code == 0, result.output
    payload = json.loads(result.output.strip().splitlines()[-1])
    assert payload["peak_concurrence"] == pytest.approx(0.11, abs=0.02)
    rows = np.loadtxt(tmp_path / "concurrence_sweep.csv", delimiter=",", skiprows=1)
    assert rows.shape == (41, 2)


def test_fieldmap_command(runner, tmp_path):
    from chiralpair.chiralfield import FieldGrid

    ex = np.array([[1j, 1.0], [0.0, np.exp(0.3j)]])
    ey = np.array([[1.0, 1.0], [0.0, 1.0]])
    io.write_field_grid(tmp_path / "grid.csv", FieldGrid(ex=ex, ey=ey))
    config = tmp_path / "emitter.json"
    config.write_text(json.dumps({"emitter": {"jitter_sigma_ns": 0.0}}))
    result = runner.invoke(main, [
        "fieldmap", str(tmp_path / "grid.csv"), "--preset", "qd1",
        "--config", str(config), "--out-dir", str(tmp_path), "--tau", "0.0",
    ])
    assert result.exit_code == 0, result.output
    phase = np.loadtxt(tmp_path / "map_phase.csv", delimiter=",", skiprows=1)
    conc = np.loadtxt(tmp_path / "map_concurrence.csv", delimiter=",", skiprows=1)
    assert phase[0, 2] == pytest.approx(math.pi / 2, abs=1e-9)
    assert conc[0, 2] == pytest.approx(1.0, abs=1e-9)
    assert np.isnan(conc[2, 2])  # masked cell


def test_malformed_inputs_fail_with_json_error(runner, tmp_path):
    (tmp_path / "nothist.csv").write_text("tau_ps,counts\n")
    result = runner.invoke(main, [
        "align", str(tmp_path / "nothist.csv"), str(tmp_path / "nothist.csv"),
        "--out-dir", str(tmp_path),
    ])
    assert result.exit_code == 1
    err = json.loads(result.stderr.strip().splitlines()[-1])
    assert "error" in err
