"""
Result emission: CSV tables, native line-plot SVGs, PGM eye rasters and run_info.json.

CSVs carry only deterministic quantities (9 significant digits); wall time and other run
metadata go to run_info.json.
"""

from __future__ import annotations

import json
import math
from html import escape
from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd
import structlog

from core_simulation import __version__
from core_simulation.errors import OutputError
from core_simulation.metrics import EyeData, Spectrum
from core_simulation.runner import MetricsReport, SweepResult, channel_reports, sweep_rows

logger = structlog.get_logger(__name__)

FLOAT_FORMAT = "%.9g"
PSD_FLOOR_W_PER_HZ = 1e-30

METRICS_COLUMNS = [
    "channel_index",
    "wavelength_nm",
    "rx_power_dbm",
    "q_db",
    "ber_estimated",
    "ber_counted",
    "eye_opening",
    "aligned",
    "ber_countable",
]

SVG_WIDTH = 720
SVG_HEIGHT = 420
SVG_MARGIN = {"left": 80, "right": 24, "top": 40, "bottom": 56}
SVG_COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"]


def metrics_frame(report: MetricsReport) -> pd.DataFrame:
    rows = []
    for channel in report.channels:
        qber = channel.qber
        rows.append(
            {
                "channel_index": channel.channel_index,
                "wavelength_nm": channel.wavelength_nm,
                "rx_power_dbm": channel.rx_power_dbm,
                "q_db": qber.q_db if qber else math.nan,
                "ber_estimated": qber.ber_estimated if qber else math.nan,
                "ber_counted": qber.ber_counted if qber else math.nan,
                "eye_opening": channel.eye.eye_opening if channel.eye else math.nan,
                "aligned": channel.aligned,
                "ber_countable": qber.countable if qber else False,
            }
        )
    return pd.DataFrame(rows, columns=METRICS_COLUMNS)


def dispersion_frame(report: MetricsReport) -> pd.DataFrame:
    return pd.DataFrame(
        [
            (p.distance_km, p.cumulative_dispersion_ps_nm, p.link_dispersion_ps_nm, p.element_label)
            for p in report.dispersion_map
        ],
        columns=["distance_km", "cumulative_dispersion_ps_nm", "link_dispersion_ps_nm", "element_label"],
    )


def residual_frame(report: MetricsReport) -> pd.DataFrame:
    return pd.DataFrame(
        [
            (r.channel_index, r.wavelength_nm, r.link_dispersion_ps_nm, r.pre_dcm_ps_nm, r.final_dispersion_ps_nm)
            for r in report.residual_dispersion
        ],
        columns=["channel_index", "wavelength_nm", "link_dispersion_ps_nm", "pre_dcm_ps_nm", "final_dispersion_ps_nm"],
    )


def power_frame(report: MetricsReport) -> pd.DataFrame:
    return pd.DataFrame(
        [(p.distance_km, p.total_power_dbm, p.per_channel_power_dbm, p.element_label) for p in report.power_map],
        columns=["distance_km", "total_power_dbm", "per_channel_power_dbm", "element_label"],
    )


def spectrum_frame(spec: Spectrum) -> pd.DataFrame:
    psd = np.maximum(spec.psd, PSD_FLOOR_W_PER_HZ)
    return pd.DataFrame(
        {
            "frequency_thz": spec.frequency / 1e12,
            # W/Hz -> dBm/GHz
            "psd_dbm_per_ghz": 10.0 * np.log10(psd * 1e9 / 1e-3),
        }
    )


def eye_frame(eye: EyeData) -> pd.DataFrame:
    n_positions, n_levels = eye.traces.shape
    centres = 0.5 * (eye.amplitude_edges[:-1] + eye.amplitude_edges[1:])
    return pd.DataFrame(
        {
            "time_ui": np.repeat(np.arange(n_positions) / eye.samples_per_bit, n_levels),
            "current_a": np.tile(centres, n_positions),
            "count": eye.traces.reshape(-1),
        }
    )


def sweep_frame(result: SweepResult) -> pd.DataFrame:
    frame = pd.DataFrame(sweep_rows(result))
    return frame.rename(columns={"value": result.param})


def sweep_channels_frame(result: SweepResult) -> pd.DataFrame:
    rows = []
    for value, channel in channel_reports(result):
        rows.append(
            {
                result.param: value,
                "channel_index": channel.channel_index,
                "wavelength_nm": channel.wavelength_nm,
                "rx_power_dbm": channel.rx_power_dbm,
                "q_db": channel.q_db,
                "ber_estimated": channel.ber_estimated,
                "aligned": channel.aligned,
            }
        )
    return pd.DataFrame(rows)


def eye_pgm(eye: EyeData) -> bytes:
    """Binary greyscale raster: time across, current upwards, log-scaled hit density."""
    image = np.log1p(eye.traces.T[::-1].astype(np.float64))
    peak = image.max()
    if peak > 0:
        image = image / peak
    pixels = np.round(255.0 * image).astype(np.uint8)
    height, width = pixels.shape
    return f"P5\n{width} {height}\n255\n".encode("ascii") + pixels.tobytes()


def _ticks(low: float, high: float, n: int = 5) -> list[float]:
    if high == low:
        return [low]
    return list(np.linspace(low, high, n))


def svg_line_plot(
    series: Sequence[tuple[str, Sequence[float], Sequence[float]]],
    title: str,
    x_label: str,
    y_label: str,
    log_y: bool = False,
) -> str:
    """Small self-contained line plot; non-finite points are skipped."""
    cleaned = []
    for label, xs, ys in series:
        xs = np.asarray(xs, dtype=np.float64)
        ys = np.asarray(ys, dtype=np.float64)
        if log_y:
            ys = np.where(ys > 0, np.log10(np.where(ys > 0, ys, 1.0)), np.nan)
        keep = np.isfinite(xs) & np.isfinite(ys)
        cleaned.append((label, xs[keep], ys[keep]))

    all_x = np.concatenate([xs for _, xs, _ in cleaned]) if cleaned else np.array([])
    all_y = np.concatenate([ys for _, _, ys in cleaned]) if cleaned else np.array([])
    if all_x.size == 0:
        all_x = np.array([0.0, 1.0])
        all_y = np.array([0.0, 1.0])
    x0, x1 = float(all_x.min()), float(all_x.max())
    y0, y1 = float(all_y.min()), float(all_y.max())
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5

    left, right, top, bottom = (SVG_MARGIN[k] for k in ("left", "right", "top", "bottom"))
    plot_w = SVG_WIDTH - left - right
    plot_h = SVG_HEIGHT - top - bottom

    def sx(x):
        return left + (x - x0) / (x1 - x0) * plot_w

    def sy(y):
        return top + (1.0 - (y - y0) / (y1 - y0)) * plot_h

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{SVG_WIDTH}" height="{SVG_HEIGHT}" '
        f'viewBox="0 0 {SVG_WIDTH} {SVG_HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect x="0" y="0" width="{SVG_WIDTH}" height="{SVG_HEIGHT}" fill="white"/>',
        f'<text x="{SVG_WIDTH / 2:.1f}" y="22" text-anchor="middle" font-size="15">{escape(title)}</text>',
        f'<rect x="{left}" y="{top}" width="{plot_w}" height="{plot_h}" fill="none" stroke="#444"/>',
    ]
    for x in _ticks(x0, x1):
        parts.append(
            f'<text x="{sx(x):.1f}" y="{top + plot_h + 18}" text-anchor="middle">{x:.4g}</text>'
        )
    for y in _ticks(y0, y1):
        label = f"1e{y:.3g}" if log_y else f"{y:.4g}"
        parts.append(
            f'<line x1="{left}" y1="{sy(y):.1f}" x2="{left + plot_w}" y2="{sy(y):.1f}" stroke="#e5e5e5"/>'
        )
        parts.append(f'<text x="{left - 6}" y="{sy(y) + 4:.1f}" text-anchor="end">{label}</text>')
    parts.append(
        f'<text x="{left + plot_w / 2:.1f}" y="{SVG_HEIGHT - 14}" text-anchor="middle">{escape(x_label)}</text>'
    )
    parts.append(
        f'<text x="18" y="{top + plot_h / 2:.1f}" text-anchor="middle" '
        f'transform="rotate(-90 18 {top + plot_h / 2:.1f})">{escape(y_label)}</text>'
    )
    for i, (label, xs, ys) in enumerate(cleaned):
        color = SVG_COLORS[i % len(SVG_COLORS)]
        if xs.size:
            points = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in zip(xs, ys))
            parts.append(f'<polyline points="{points}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        if len(cleaned) > 1:
            ly = top + 16 + 16 * i
            parts.append(f'<line x1="{left + 10}" y1="{ly}" x2="{left + 30}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
            parts.append(f'<text x="{left + 36}" y="{ly + 4}">{escape(label)}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _write_text(path: Path, text: str) -> Path:
    try:
        path.write_text(text, encoding="utf-8")
    except OSError as e:
        raise OutputError(path, e.strerror or str(e)) from e
    return path


def _write_bytes(path: Path, data: bytes) -> Path:
    try:
        path.write_bytes(data)
    except OSError as e:
        raise OutputError(path, e.strerror or str(e)) from e
    return path


def _write_csv(frame: pd.DataFrame, path: Path) -> Path:
    try:
        frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    except OSError as e:
        raise OutputError(path, e.strerror or str(e)) from e
    return path


def _prepare(out_dir: Path) -> Path:
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise OutputError(out_dir, e.strerror or str(e)) from e
    return out_dir


def _run_info(report: MetricsReport) -> dict:
    return {
        "scenario": report.scenario,
        "master_seed": report.master_seed,
        "config_hash": report.config_hash,
        "link_length_km": report.link_length_km,
        "n_channels": len(report.channels),
        "aligned_channels": report.aligned_count,
        "worst_q_db": None if math.isnan(report.worst_q_db) else report.worst_q_db,
        "worst_ber_estimated": None if math.isnan(report.worst_ber) else report.worst_ber,
        "wall_time_s": report.wall_time_s,
        "version": __version__,
    }


def write_maps(report: MetricsReport, out_dir: Path) -> list[Path]:
    """Dispersion ledger files only (what `map` emits)."""
    out_dir = _prepare(out_dir)
    written = [_write_csv(residual_frame(report), out_dir / "residual_dispersion.csv")]
    if report.dispersion_map:
        frame = dispersion_frame(report)
        written.append(_write_csv(frame, out_dir / "dispersion_map.csv"))
        svg = svg_line_plot(
            [("dispersion", frame["distance_km"], frame["cumulative_dispersion_ps_nm"])],
            "Cumulative dispersion along the link",
            "distance (km)",
            "cumulative dispersion (ps/nm)",
        )
        written.append(_write_text(out_dir / "dispersion_map.svg", svg))
    return written


def _emit_report(report: MetricsReport, out_dir: Path) -> list[Path]:
    written = [_write_csv(metrics_frame(report), out_dir / "metrics.csv")]
    written += write_maps(report, out_dir)

    if report.power_map:
        frame = power_frame(report)
        written.append(_write_csv(frame, out_dir / "power_map.csv"))
        svg = svg_line_plot(
            [
                ("total", frame["distance_km"], frame["total_power_dbm"]),
                ("per channel", frame["distance_km"], frame["per_channel_power_dbm"]),
            ],
            "Optical power along the link",
            "distance (km)",
            "power (dBm)",
        )
        written.append(_write_text(out_dir / "power_map.svg", svg))

    if report.rx_spectrum is not None:
        rx = spectrum_frame(report.rx_spectrum)
        written.append(_write_csv(rx, out_dir / "spectrum.csv"))
        series = [("received", rx["frequency_thz"], rx["psd_dbm_per_ghz"])]
        if report.tx_spectrum is not None:
            tx = spectrum_frame(report.tx_spectrum)
            written.append(_write_csv(tx, out_dir / "spectrum_tx.csv"))
            series.insert(0, ("transmitted", tx["frequency_thz"], tx["psd_dbm_per_ghz"]))
        svg = svg_line_plot(series, "Optical spectrum", "frequency (THz)", "PSD (dBm/GHz)")
        written.append(_write_text(out_dir / "spectrum.svg", svg))

    for channel in report.channels:
        if channel.eye is None:
            continue
        stem = f"eye_ch{channel.channel_index:02d}"
        written.append(_write_bytes(out_dir / f"{stem}.pgm", eye_pgm(channel.eye)))
        written.append(_write_csv(eye_frame(channel.eye), out_dir / f"{stem}.csv"))

    info = json.dumps(_run_info(report), indent=2, sort_keys=True)
    written.append(_write_text(out_dir / "run_info.json", info + "\n"))
    return written


def _emit_sweep(result: SweepResult, out_dir: Path) -> list[Path]:
    summary = sweep_frame(result)
    written = [
        _write_csv(summary, out_dir / "sweep.csv"),
        _write_csv(sweep_channels_frame(result), out_dir / "sweep_channels.csv"),
    ]
    svg = svg_line_plot(
        [("worst channel", summary[result.param], summary["worst_ber_estimated"])],
        f"BER versus {result.param}",
        result.param,
        "estimated BER",
        log_y=True,
    )
    written.append(_write_text(out_dir / "sweep.svg", svg))
    info = {
        "scenario": result.scenario,
        "param": result.param,
        "values": [p.value for p in result.points],
        "config_hash": result.config_hash,
        "wall_time_s": sum(p.report.wall_time_s for p in result.points),
        "version": __version__,
    }
    written.append(_write_text(out_dir / "run_info.json", json.dumps(info, indent=2, sort_keys=True) + "\n"))
    return written


def emit_outputs(result: MetricsReport | SweepResult, out_dir: str | Path) -> list[Path]:
    """
    Write every file for a run or sweep into `out_dir` and return their paths.

    Raises:
        OutputError: any I/O failure, carrying the offending path
    """
    out_dir = _prepare(Path(out_dir))
    if isinstance(result, SweepResult):
        written = _emit_sweep(result, out_dir)
    else:
        written = _emit_report(result, out_dir)
    logger.info("outputs_written", out_dir=str(out_dir), files=len(written))
    return written
