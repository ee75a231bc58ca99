"""Command-line surface: one subcommand per pipeline stage, files in between."""

from __future__ import annotations

import functools
import json
import math
import sys
import time
from pathlib import Path

import click
import numpy as np

from . import chiralfield, entanglement, fit, io, timematch
from .correlate import correlate_streams
from .params import (
    PRESETS,
    EmitterParams,
    InstrumentParams,
    PortPair,
    ghz_to_angular,
    preset_emitter,
)
from .simulate import CHANNELS, simulate_run

_EMITTER_KEYS = {
    "gamma_x": "gamma_x",
    "fss_ghz": "fss",
    "phi_rad": "phi",
    "jitter_sigma_ns": "jitter_sigma",
    "rep_period_ns": "rep_period",
}
_INSTRUMENT_KEYS = {
    "efficiency_xx_a",
    "efficiency_xx_b",
    "efficiency_x_a",
    "efficiency_x_b",
    "dark_rate_per_ns",
    "pair_probability",
    "rep_rate_drift",
    "duration_s",
    "seed",
}


class ConfigError(ValueError):
    pass


def load_run_config(
    config_path: str | None, preset: str | None, seed: int | None
) -> tuple[EmitterParams, InstrumentParams, dict]:
    """Build parameters from a preset and/or a JSON config document.

    Config keys override preset values; unknown keys are rejected.
    """
    doc: dict = {}
    if config_path:
        doc = json.loads(Path(config_path).read_text())
        if not isinstance(doc, dict):
            raise ConfigError("config document must be a JSON object")
        unknown = set(doc) - {"emitter", "instrument"}
        if unknown:
            raise ConfigError(f"unknown top-level config keys: {sorted(unknown)}")

    emitter_doc = dict(doc.get("emitter", {}))
    unknown = set(emitter_doc) - set(_EMITTER_KEYS)
    if unknown:
        raise ConfigError(f"unknown emitter keys: {sorted(unknown)}")
    if preset:
        base = preset_emitter(preset)
        emitter_kwargs = {
            "gamma_x": base.gamma_x,
            "fss": base.fss,
            "phi": base.phi,
            "jitter_sigma": base.jitter_sigma,
            "rep_period": base.rep_period,
        }
    elif set(emitter_doc) >= {"gamma_x", "fss_ghz", "phi_rad"}:
        emitter_kwargs = {"jitter_sigma": 0.0, "rep_period": 13.0}
    else:
        raise ConfigError(
            "need --preset or a config with emitter gamma_x, fss_ghz, phi_rad"
        )
    for key, target in _EMITTER_KEYS.items():
        if key in emitter_doc:
            value = float(emitter_doc[key])
            emitter_kwargs[target] = ghz_to_angular(value) if key == "fss_ghz" else value
    emitter = EmitterParams(**emitter_kwargs)

    inst_doc = dict(doc.get("instrument", {}))
    unknown = set(inst_doc) - _INSTRUMENT_KEYS
    if unknown:
        raise ConfigError(f"unknown instrument keys: {sorted(unknown)}")
    inst_kwargs = {}
    for key, value in inst_doc.items():
        if key == "dark_rate_per_ns":
            inst_kwargs["dark_rate"] = float(value)
        elif key == "duration_s":
            inst_kwargs["duration"] = float(value)
        elif key == "seed":
            inst_kwargs["seed"] = int(value)
        else:
            inst_kwargs[key] = float(value)
    if seed is not None:
        inst_kwargs["seed"] = seed
    inst = InstrumentParams(**inst_kwargs)

    resolved = {
        "emitter": {
            "gamma_x": emitter.gamma_x,
            "fss_ghz": emitter.fss / (2 * math.pi),
            "phi_rad": emitter.phi,
            "jitter_sigma_ns": emitter.jitter_sigma,
            "rep_period_ns": emitter.rep_period,
        },
        "instrument": {
            "efficiency_xx_a": inst.efficiency_xx_a,
            "efficiency_xx_b": inst.efficiency_xx_b,
            "efficiency_x_a": inst.efficiency_x_a,
            "efficiency_x_b": inst.efficiency_x_b,
            "dark_rate_per_ns": inst.dark_rate,
            "pair_probability": inst.pair_probability,
            "rep_rate_drift": inst.rep_rate_drift,
            "duration_s": inst.duration,
            "seed": inst.seed,
        },
        "preset": preset,
    }
    return emitter, inst, resolved


def fail_json(func):
    """Emit machine-readable errors on stderr and exit nonzero."""

    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except (click.ClickException, click.Abort):
            raise
        except Exception as exc:  # noqa: BLE001 - single reporting point
            payload = {"error": type(exc).__name__, "message": str(exc)}
            print(json.dumps(payload), file=sys.stderr)
            sys.exit(1)

    return wrapper


@click.group()
def main():
    """Dual-rail photon-pair source simulation and analysis pipeline."""


common_params = [
    click.option("--config", "config_path", type=click.Path(exists=True), default=None,
                 help="JSON run configuration."),
    click.option("--preset", type=click.Choice(sorted(PRESETS)), default=None,
                 help="Published device parameter preset."),
    click.option("--seed", type=int, default=None, help="RNG seed override."),
    click.option("--out-dir", type=click.Path(), default=".", help="Output directory."),
]


def with_common(func):
    for opt in reversed(common_params):
        func = opt(func)
    return func


@main.command()
@with_common
@click.option("--reproducible", is_flag=True,
              help="Omit wall-clock metadata from the manifest.")
@fail_json
def simulate(config_path, preset, seed, out_dir, reproducible):
    """Generate four channel timestamp files and a manifest."""
    emitter, inst, resolved = load_run_config(config_path, preset, seed)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    streams = simulate_run(emitter, inst)
    digest = io.params_hash(resolved)
    files = {}
    for channel, stream in streams.items():
        name = f"timestamps_{channel.replace('@', '_')}.csv"
        io.write_timestamps(out / name, stream, seed=inst.seed, params_hash_=digest)
        files[channel] = name
    manifest = {
        "params_hash": digest,
        "config": resolved,
        "files": files,
        "n_events": {c: int(s.times.size) for c, s in streams.items()},
    }
    if not reproducible:
        manifest["created_at"] = time.strftime("%Y-%m-%dT%H:%M:%S")
    io.write_json(out / "manifest.json", manifest)
    click.echo(json.dumps({"out_dir": str(out), "params_hash": digest}))


def _streams_for_config(run_dir: Path, config: PortPair):
    manifest = io.read_json(run_dir / "manifest.json")
    xx_file = manifest["files"][f"XX@{config.xx_port}"]
    x_file = manifest["files"][f"X@{config.x_port}"]
    start, _ = io.read_timestamps(run_dir / xx_file)
    stop, _ = io.read_timestamps(run_dir / x_file)
    return start, stop


@main.command()
@click.argument("run_dir", type=click.Path(exists=True))
@click.option("--pairs", default="AA,AB", help="Comma-separated port pairs.")
@click.option("--bin-width", type=float, default=4.0, help="Bin width [ps].")
@click.option("--window", type=float, default=50_000_000.0,
              help="Half window [ps]; histogram spans +-window.")
@click.option("--out-dir", type=click.Path(), default=None,
              help="Defaults to the run directory.")
@fail_json
def correlate(run_dir, pairs, bin_width, window, out_dir):
    """Build coincidence histograms for the requested port pairs."""
    run_dir = Path(run_dir)
    out = Path(out_dir) if out_dir else run_dir
    out.mkdir(parents=True, exist_ok=True)
    written = {}
    for name in pairs.split(","):
        config = PortPair(name.strip().upper())
        start, stop = _streams_for_config(run_dir, config)
        h = correlate_streams(
            start, stop, bin_width_ps=bin_width, window_ps=(-window, window)
        )
        h.config = config.value
        path = out / f"hist_{config.value}.csv"
        io.write_histogram(path, h)
        written[config.value] = path.name
    click.echo(json.dumps({"out_dir": str(out), "histograms": written}))


@main.command()
@click.argument("hist_ref", type=click.Path(exists=True))
@click.argument("hist_mov", type=click.Path(exists=True))
@click.option("--out-dir", type=click.Path(), default=".")
@click.option("--apply", "extra", multiple=True, type=click.Path(exists=True),
              help="Sibling histogram (same clock as HIST_MOV) to transform "
                   "with the identical alignment.")
@fail_json
def align(hist_ref, hist_mov, out_dir, extra):
    """Align the second histogram onto the first one's time axis."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    h_ref = io.read_histogram(hist_ref)
    h_mov = io.read_histogram(hist_mov)
    result, shifted = timematch.align_datasets(h_ref, h_mov)
    io.write_json(out / "alignment.json", result.to_dict())
    io.write_histogram(out / "hist_aligned.csv", shifted)
    for path in extra:
        h = io.read_histogram(path)
        moved = timematch.apply_alignment(h, h_ref, result)
        io.write_histogram(out / f"{Path(path).stem}_aligned.csv", moved)
    click.echo(json.dumps(result.to_dict()))


@main.command(name="fit")
@click.argument("hist_ab", type=click.Path(exists=True))
@click.argument("hist_aa", type=click.Path(exists=True))
@click.option("--gamma", type=float, required=True,
              help="Separately measured exciton decay rate [1/ns].")
@click.option("--out-dir", type=click.Path(), default=".")
@fail_json
def fit_cmd(hist_ab, hist_aa, gamma, out_dir):
    """Two-stage fit: different-port first, then the phase from same-port."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    h_ab = io.read_histogram(hist_ab)
    h_aa = io.read_histogram(hist_aa)
    stage1 = fit.fit_stage1(h_ab, gamma_x=gamma)
    stage2 = fit.fit_stage2(h_aa, stage1, gamma_x=gamma)
    io.write_json(out / "fit_stage1.json", stage1.to_dict())
    io.write_json(out / "fit_stage2.json", stage2.to_dict())
    np.savetxt(out / "overlay_stage1.csv", fit.overlay_table(h_ab, stage1, gamma),
               fmt="%.6g", delimiter=",", header="tau_ps,data,model", comments="")
    np.savetxt(out / "overlay_stage2.csv", fit.overlay_table(h_aa, stage2, gamma),
               fmt="%.6g", delimiter=",", header="tau_ps,data,model", comments="")
    click.echo(json.dumps({
        "phi_over_pi": stage2.values["phi"] / math.pi,
        "phi_err_over_pi": stage2.stderr["phi"] / math.pi,
        "fss_ghz": stage1.values["fss"] / (2 * math.pi),
        "fss_err_ghz": stage1.stderr["fss"] / (2 * math.pi),
    }))


@main.command(name="entanglement")
@with_common
@click.option("--tau-max", type=float, default=1.0, help="Sweep end [ns].")
@click.option("--points", type=int, default=201, help="Grid size.")
@fail_json
def entanglement_cmd(config_path, preset, seed, out_dir, tau_max, points):
    """Concurrence and entropy sweep versus the photon delay."""
    emitter, _, _ = load_run_config(config_path, preset, seed)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    grid = np.linspace(0.0, tau_max, points)
    rows = entanglement.concurrence_sweep(emitter, grid)
    io.write_sweep(out / "concurrence_sweep.csv", rows)
    peak = float(rows[:, 1].max())
    click.echo(json.dumps({
        "peak_concurrence": peak,
        "peak_tau_ns": float(rows[np.argmax(rows[:, 1]), 0]),
        "csv": str(out / "concurrence_sweep.csv"),
    }))


@main.command()
@click.argument("grid_csv", type=click.Path(exists=True))
@with_common
@click.option("--tau", type=float, default=0.0, help="Delay for the C map [ns].")
@fail_json
def fieldmap(grid_csv, config_path, preset, seed, out_dir, tau):
    """Local phase, directionality and concurrence maps from a field grid."""
    emitter, _, _ = load_run_config(config_path, preset, seed)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    grid = io.read_field_grid(grid_csv)
    io.write_map(out / "map_phase.csv", chiralfield.local_phase(grid))
    io.write_map(out / "map_directionality.csv", chiralfield.directionality(grid))
    io.write_map(out / "map_concurrence.csv",
                 chiralfield.concurrence_map(grid, emitter, tau))
    click.echo(json.dumps({"out_dir": str(out)}))


@main.command()
@click.argument("run_dir", type=click.Path(exists=True))
@click.option("--reflectance", "r_squared", type=float, default=None,
              help="Grating power reflectance r^2 for the phase back-out.")
@fail_json
def report(run_dir, r_squared):
    """Summarize a run directory: manifest, fits, entanglement, phase back-out."""
    run_dir = Path(run_dir)
    summary: dict = {}
    manifest_path = run_dir / "manifest.json"
    if manifest_path.exists():
        summary["manifest"] = io.read_json(manifest_path)
    for stage in ("fit_stage1", "fit_stage2"):
        path = run_dir / f"{stage}.json"
        if path.exists():
            summary[stage] = io.read_json(path)
    sweep_path = run_dir / "concurrence_sweep.csv"
    if sweep_path.exists():
        rows = np.loadtxt(sweep_path, delimiter=",", skiprows=1, ndmin=2)
        summary["peak_concurrence"] = float(rows[:, 1].max())
    if r_squared is not None and "fit_stage2" in summary:
        phi = summary["fit_stage2"]["values"]["phi"]
        phi0 = chiralfield.ideal_phase_from(phi, math.sqrt(r_squared))
        summary["phase_backout"] = {
            "observed_phi_over_pi": phi / math.pi,
            "reflectance_r2": r_squared,
            "ideal_phi_over_pi": phi0 / math.pi,
        }
    io.write_json(run_dir / "report.json", summary)
    click.echo(json.dumps(summary, default=float))


if __name__ == "__main__":
    main()
