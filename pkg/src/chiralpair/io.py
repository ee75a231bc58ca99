"""File formats used as interchange between the pipeline stages.

* Timestamp stream: one file per channel. First line is a JSON header
  (channel, tick_ps, duration_ps, seed, params_hash), followed by one
  unsigned tick count per line. Round trips bit-exactly.
* Correlation histogram: CSV of (tau_ps, counts) with a JSON sidecar holding
  the axis metadata.
* Field grid: CSV with columns ix, iy, re_ex, im_ex, re_ey, im_ey.
* Scalar maps: CSV with columns ix, iy, value (NaN for masked cells).
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from .chiralfield import FieldGrid
from .correlate import CorrelationHistogram
from .simulate import TimestampStream


def params_hash(payload: dict) -> str:
    blob = json.dumps(payload, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def write_timestamps(
    path: Path | str,
    stream: TimestampStream,
    seed: int | None = None,
    params_hash_: str = "",
) -> None:
    path = Path(path)
    header = {
        "channel": stream.channel,
        "tick_ps": stream.tick_ps,
        "duration_ps": stream.duration_ps,
        "seed": seed,
        "params_hash": params_hash_,
    }
    with path.open("w") as f:
        f.write(json.dumps(header) + "\n")
        np.savetxt(f, stream.times, fmt="%d")


def read_timestamps(path: Path | str) -> tuple[TimestampStream, dict]:
    path = Path(path)
    with path.open() as f:
        header = json.loads(f.readline())
        times = np.loadtxt(f, dtype=np.uint64, ndmin=1)
    stream = TimestampStream(
        channel=header["channel"],
        times=times,
        duration_ps=header["duration_ps"],
        tick_ps=header["tick_ps"],
    )
    return stream, header


def write_histogram(path: Path | str, h: CorrelationHistogram) -> None:
    """CSV body plus a .json sidecar next to it."""
    path = Path(path)
    rows = np.column_stack([h.bin_centers(), h.counts])
    # counts may be fractional after count-conserving rebinning
    count_fmt = "%d" if np.issubdtype(np.asarray(h.counts).dtype, np.integer) else "%.12g"
    np.savetxt(path, rows, fmt=f"%.3f,{count_fmt}", header="tau_ps,counts", comments="")
    sidecar = {
        "config": h.config,
        "bin_width_ps": h.bin_width_ps,
        "tau_min_ps": h.tau_min_ps,
        "tau_max_ps": h.tau_max_ps,
        "total_pairs": h.total_pairs,
    }
    path.with_suffix(path.suffix + ".json").write_text(json.dumps(sidecar, indent=2))


def read_histogram(path: Path | str) -> CorrelationHistogram:
    path = Path(path)
    sidecar = json.loads(path.with_suffix(path.suffix + ".json").read_text())
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    counts = data[:, 1]
    int_counts = np.round(counts).astype(np.int64)
    if np.allclose(counts, int_counts):
        counts = int_counts
    return CorrelationHistogram(
        config=sidecar["config"],
        bin_width_ps=sidecar["bin_width_ps"],
        tau_min_ps=sidecar["tau_min_ps"],
        tau_max_ps=sidecar["tau_max_ps"],
        counts=counts,
        total_pairs=sidecar["total_pairs"],
    )


def write_field_grid(path: Path | str, grid: FieldGrid) -> None:
    iy, ix = np.mgrid[0 : grid.ny, 0 : grid.nx]
    rows = np.column_stack(
        [
            ix.ravel(),
            iy.ravel(),
            grid.ex.real.ravel(),
            grid.ex.imag.ravel(),
            grid.ey.real.ravel(),
            grid.ey.imag.ravel(),
        ]
    )
    np.savetxt(
        Path(path),
        rows,
        fmt=["%d", "%d", "%.12g", "%.12g", "%.12g", "%.12g"],
        delimiter=",",
        header="ix,iy,re_ex,im_ex,re_ey,im_ey",
        comments="",
    )


def read_field_grid(path: Path | str, spacing: float = 1.0) -> FieldGrid:
    data = np.loadtxt(Path(path), delimiter=",", skiprows=1, ndmin=2)
    if data.shape[1] != 6:
        raise ValueError("field grid CSV must have 6 columns")
    ix = data[:, 0].astype(int)
    iy = data[:, 1].astype(int)
    nx, ny = ix.max() + 1, iy.max() + 1
    if data.shape[0] != nx * ny:
        raise ValueError("field grid CSV does not cover a full rectangle")
    ex = np.zeros((ny, nx), dtype=complex)
    ey = np.zeros((ny, nx), dtype=complex)
    ex[iy, ix] = data[:, 2] + 1j * data[:, 3]
    ey[iy, ix] = data[:, 4] + 1j * data[:, 5]
    return FieldGrid(ex=ex, ey=ey, spacing=spacing)


def write_map(path: Path | str, values: np.ndarray) -> None:
    ny, nx = values.shape
    iy, ix = np.mgrid[0:ny, 0:nx]
    rows = np.column_stack([ix.ravel(), iy.ravel(), values.ravel()])
    np.savetxt(
        Path(path),
        rows,
        fmt=["%d", "%d", "%.12g"],
        delimiter=",",
        header="ix,iy,value",
        comments="",
    )


def write_sweep(path: Path | str, rows: np.ndarray) -> None:
    """Concurrence sweep as (tau_ns, concurrence) CSV."""
    np.savetxt(
        Path(path), rows, fmt="%.9g", delimiter=",",
        header="tau_ns,concurrence", comments="",
    )


def write_json(path: Path | str, payload: dict) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, default=float))


def read_json(path: Path | str) -> dict:
    return json.loads(Path(path).read_text())
