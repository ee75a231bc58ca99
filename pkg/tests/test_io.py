import json
import math

import numpy as np
import pytest

from chiralpair import io
from chiralpair.chiralfield import FieldGrid, local_phase
from chiralpair.correlate import CorrelationHistogram
from chiralpair.simulate import TimestampStream


def test_params_hash_stable_and_order_independent():
    a = io.params_hash({"x": 1, "y": [1, 2]})
    b = io.params_hash({"y": [1, 2], "x": 1})
    assert a == b
    assert len(a) == 16
    assert io.params_hash({"x": 2}) != a


def test_timestamp_round_trip(tmp_path):
    stream = TimestampStream(
        channel="XX@A", times=[0, 5, 5, 123456], duration_ps=1_000_000
    )
    path = tmp_path / "ts.csv"
    io.write_timestamps(path, stream, seed=7, params_hash_="abc123")
    back, header = io.read_timestamps(path)
    np.testing.assert_array_equal(back.times, stream.times)
    assert back.channel == "XX@A"
    assert back.duration_ps == stream.duration_ps
    assert back.tick_ps == stream.tick_ps
    assert header["seed"] == 7
    assert header["params_hash"] == "abc123"


def test_timestamp_round_trip_single_event(tmp_path):
    stream = TimestampStream(channel="X@B", times=[42], duration_ps=1000)
    path = tmp_path / "one.csv"
    io.write_timestamps(path, stream)
    back, _ = io.read_timestamps(path)
    np.testing.assert_array_equal(back.times, [42])


def test_histogram_round_trip(tmp_path):
    h = CorrelationHistogram(
        config="AA", bin_width_ps=4.0, tau_min_ps=-400.0, tau_max_ps=400.0,
        counts=np.arange(200, dtype=np.int64), total_pairs=int(np.arange(200).sum()),
    )
    path = tmp_path / "hist.csv"
    io.write_histogram(path, h)
    assert (tmp_path / "hist.csv.json").exists()
    back = io.read_histogram(path)
    np.testing.assert_array_equal(back.counts, h.counts)
    assert back.config == "AA"
    assert back.bin_width_ps == 4.0
    assert back.tau_min_ps == -400.0
    assert back.total_pairs == h.total_pairs
    np.testing.assert_allclose(back.bin_centers(), h.bin_centers())


def test_field_grid_round_trip(tmp_path):
    rng = np.random.default_rng(1)
    ex = rng.normal(size=(3, 5)) + 1j * rng.normal(size=(3, 5))
    ey = rng.normal(size=(3, 5)) + 1j * rng.normal(size=(3, 5))
    ex[1, 2] = ey[1, 2] = 0.0  # masked cell survives the trip
    grid = FieldGrid(ex=ex, ey=ey)
    path = tmp_path / "grid.csv"
    io.write_field_grid(path, grid)
    back = io.read_field_grid(path)
    np.testing.assert_allclose(back.ex, ex, atol=1e-10)
    np.testing.assert_allclose(back.ey, ey, atol=1e-10)
    assert back.mask[1, 2]
    np.testing.assert_allclose(
        local_phase(back)[0], local_phase(grid)[0], atol=1e-9
    )


def test_field_grid_rejects_partial_rectangle(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("ix,iy,re_ex,im_ex,re_ey,im_ey\n0,0,1,0,1,0\n2,1,1,0,1,0\n")
    with pytest.raises(ValueError):
        io.read_field_grid(path)


def test_map_output_includes_nan_sentinel(tmp_path):
    values = np.array([[0.5, float("nan")], [1.0, -0.25]])
    path = tmp_path / "map.csv"
    io.write_map(path, values)
    text = path.read_text()
    assert text.splitlines()[0] == "ix,iy,value"
    assert "nan" in text.lower()
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    assert np.isnan(data[1, 2])
    assert data[3, 2] == -0.25


def test_sweep_output(tmp_path):
    rows = np.column_stack([np.linspace(0, 1, 5), np.linspace(0, 0.5, 5)])
    path = tmp_path / "sweep.csv"
    io.write_sweep(path, rows)
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    np.testing.assert_allclose(data, rows, atol=1e-9)


def test_json_round_trip(tmp_path):
    payload = {"a": 1, "b": [1.5, 2.5], "c": {"d": "x"}}
    path = tmp_path / "x.json"
    io.write_json(path, payload)
    assert io.read_json(path) == payload
    # non-serializable numerics fall back to float
    io.write_json(path, {"v": np.float64(math.pi)})
    assert io.read_json(path)["v"] == pytest.approx(math.pi)
    assert json.loads(path.read_text())  # valid JSON on disk
