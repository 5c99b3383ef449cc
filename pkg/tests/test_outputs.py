import json

import numpy as np
import pandas as pd
import pytest

from core_simulation.errors import OutputError
from core_simulation.outputs import METRICS_COLUMNS, emit_outputs, eye_pgm, svg_line_plot, write_maps
from core_simulation.runner import run_scenario, run_sweep
from core_simulation.scenario import SweepDirective
from helpers import small_scenario


@pytest.fixture(scope="module")
def config():
    return small_scenario(channel_plan={"n_channels": 2, "first_wavelength_nm": 1549.8}, loops=1)


@pytest.fixture(scope="module")
def report(config):
    return run_scenario(config)


def test_run_writes_every_table(report, tmp_path):
    written = emit_outputs(report, tmp_path)
    names = {path.name for path in written}
    assert {
        "metrics.csv",
        "residual_dispersion.csv",
        "dispersion_map.csv",
        "dispersion_map.svg",
        "power_map.csv",
        "power_map.svg",
        "spectrum.csv",
        "spectrum_tx.csv",
        "spectrum.svg",
        "eye_ch00.pgm",
        "eye_ch00.csv",
        "eye_ch01.pgm",
        "eye_ch01.csv",
        "run_info.json",
    } == names
    assert all(path.exists() for path in written)


def test_metrics_table(report, tmp_path):
    emit_outputs(report, tmp_path)
    frame = pd.read_csv(tmp_path / "metrics.csv")
    assert list(frame.columns) == METRICS_COLUMNS
    assert list(frame["channel_index"]) == [0, 1]
    assert frame["aligned"].all()
    np.testing.assert_allclose(frame["wavelength_nm"], [1549.8, 1550.2])


def test_dispersion_map_table(report, tmp_path):
    emit_outputs(report, tmp_path)
    frame = pd.read_csv(tmp_path / "dispersion_map.csv")
    assert list(frame.columns) == ["distance_km", "cumulative_dispersion_ps_nm", "link_dispersion_ps_nm", "element_label"]
    assert frame["distance_km"].is_monotonic_increasing
    residual = pd.read_csv(tmp_path / "residual_dispersion.csv")
    assert frame["cumulative_dispersion_ps_nm"].iloc[-1] == pytest.approx(residual["final_dispersion_ps_nm"].iloc[0])
    assert frame["link_dispersion_ps_nm"].iloc[-1] == pytest.approx(residual["link_dispersion_ps_nm"].iloc[0])


def test_eye_raster_is_binary_pgm(report, tmp_path):
    emit_outputs(report, tmp_path)
    data = (tmp_path / "eye_ch00.pgm").read_bytes()
    eye = report.channels[0].eye
    height, width = eye.traces.shape[1], eye.traces.shape[0]
    header = f"P5\n{width} {height}\n255\n".encode("ascii")
    assert data.startswith(header)
    assert len(data) == len(header) + width * height


def test_eye_pgm_of_empty_histogram(report):
    eye = report.channels[0].eye
    blank = type(eye)(**{**eye.__dict__, "traces": np.zeros_like(eye.traces)})
    assert eye_pgm(blank).endswith(bytes(eye.traces.size))


def test_run_info(report, tmp_path):
    emit_outputs(report, tmp_path)
    info = json.loads((tmp_path / "run_info.json").read_text())
    assert set(info) == {
        "scenario",
        "master_seed",
        "config_hash",
        "link_length_km",
        "n_channels",
        "aligned_channels",
        "worst_q_db",
        "worst_ber_estimated",
        "wall_time_s",
        "version",
    }
    assert info["scenario"] == "unit"
    assert info["n_channels"] == 2
    assert info["config_hash"] == report.config_hash


def test_rerun_gives_identical_tables(config, report, tmp_path):
    emit_outputs(report, tmp_path / "first")
    emit_outputs(run_scenario(config), tmp_path / "second")
    for first in sorted((tmp_path / "first").glob("*.csv")):
        assert first.read_bytes() == (tmp_path / "second" / first.name).read_bytes(), first.name


def test_map_only_output(report, tmp_path):
    names = {path.name for path in write_maps(report, tmp_path)}
    assert names == {"residual_dispersion.csv", "dispersion_map.csv", "dispersion_map.svg"}


def test_sweep_outputs(tmp_path):
    config = small_scenario(metrics=["q", "ber"])
    result = run_sweep(config, SweepDirective(param="transmitter.laser_power_dbm", values=[-14.0, -10.0]))
    names = {path.name for path in emit_outputs(result, tmp_path)}
    assert names == {"sweep.csv", "sweep_channels.csv", "sweep.svg", "run_info.json"}

    summary = pd.read_csv(tmp_path / "sweep.csv")
    assert summary.columns[0] == "transmitter.laser_power_dbm"
    assert list(summary["transmitter.laser_power_dbm"]) == [-14.0, -10.0]
    assert len(pd.read_csv(tmp_path / "sweep_channels.csv")) == 2
    info = json.loads((tmp_path / "run_info.json").read_text())
    assert info["values"] == [-14.0, -10.0]


def test_unwritable_directory_raises_output_error(report, tmp_path):
    blocker = tmp_path / "taken"
    blocker.write_text("not a directory")
    with pytest.raises(OutputError) as caught:
        emit_outputs(report, blocker)
    assert caught.value.path == blocker


def test_svg_line_plot():
    svg = svg_line_plot([("a", [0, 1, 2], [1.0, np.nan, 3.0])], "title <x>", "x", "y")
    assert svg.startswith("<svg")
    assert "<polyline" in svg
    assert "title &lt;x&gt;" in svg
    log_svg = svg_line_plot([("ber", [1, 2], [1e-3, 0.0])], "t", "x", "y", log_y=True)
    assert "<polyline" in log_svg
