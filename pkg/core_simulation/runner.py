"""
Scenario runner: assembles the link from a ScenarioConfig, runs it end to end, and drives
parameter sweeps and Q-uncertainty repeats.
"""

from __future__ import annotations

import hashlib
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence, TypeVar

import numpy as np
import structlog
from tqdm import tqdm

from core_simulation.errors import AlignmentError, ConfigError, ParameterError
from core_simulation.fiber_engine import propagate_link
from core_simulation.metrics import (
    DispersionMapPoint,
    EyeData,
    PowerMapPoint,
    QberResult,
    ResidualDispersion,
    Spectrum,
    dispersion_map,
    eye_diagram,
    power_map,
    power_meter,
    q_and_ber,
    q_spread_db,
    residual_dispersion,
    spectrum,
)
from core_simulation.receiver import decide, electrical_filter, photodetect
from core_simulation.scenario import ScenarioConfig, SweepDirective, config_hash, with_overrides
from core_simulation.signal_core import OpticalField, RngStream, make_grid
from core_simulation.transmitter import BitSequence, TransmitterSpec, transmit
from core_simulation.wdm import aggregate_grid, demux, mux

logger = structlog.get_logger(__name__)

# centre of the tolerated end-of-link residual window [-4, +0.6] ps/nm
RESIDUAL_WINDOW = (-4.0, 0.6)
RESIDUAL_TARGET_PS_NM = 0.5 * (RESIDUAL_WINDOW[0] + RESIDUAL_WINDOW[1])
MIN_Q_REPEATS = 5

T = TypeVar("T")
R = TypeVar("R")


@dataclass(frozen=True)
class ChannelReport:
    channel_index: int
    wavelength_nm: float
    rx_power_dbm: float
    aligned: bool
    qber: QberResult | None = None
    eye: EyeData | None = None
    message: str = ""

    @property
    def q_db(self) -> float:
        return self.qber.q_db if self.qber else math.nan

    @property
    def ber_estimated(self) -> float:
        return self.qber.ber_estimated if self.qber else math.nan


@dataclass(frozen=True)
class MetricsReport:
    scenario: str
    channels: tuple[ChannelReport, ...]
    dispersion_map: tuple[DispersionMapPoint, ...]
    residual_dispersion: tuple[ResidualDispersion, ...]
    power_map: tuple[PowerMapPoint, ...]
    tx_spectrum: Spectrum | None
    rx_spectrum: Spectrum | None
    master_seed: int
    config_hash: str
    link_length_km: float
    wall_time_s: float

    @property
    def worst_q_db(self) -> float:
        values = [c.q_db for c in self.channels if c.aligned]
        return min(values) if values else math.nan

    @property
    def worst_ber(self) -> float:
        values = [c.ber_estimated for c in self.channels if c.aligned]
        return max(values) if values else math.nan

    @property
    def aligned_count(self) -> int:
        return sum(c.aligned for c in self.channels)


@dataclass(frozen=True)
class SweepPoint:
    value: float
    report: MetricsReport


@dataclass(frozen=True)
class SweepResult:
    scenario: str
    param: str
    points: tuple[SweepPoint, ...]
    config_hash: str


@dataclass(frozen=True)
class QUncertainty:
    spread_db: float
    q_db: np.ndarray  # repeats x channels
    n_bits: int


def _map(fn: Callable[[T], R], items: Iterable[T], threads: int) -> list[R]:
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def derive_pattern_seed(pattern_seed: int, channel: int, order: int) -> int:
    """
    Nonzero LFSR seed from the data-pattern seed and channel index only.

    Channels walk the register states with a stride coprime to the period, so seeds
    stay distinct for up to 2^order - 1 channels.
    """
    period = (1 << order) - 1
    digest = hashlib.sha256(f"{pattern_seed}".encode("utf-8")).digest()
    start = int.from_bytes(digest[:8], "little") % period
    stride = max(1, round(period * 0.618))
    while math.gcd(stride, period) != 1:
        stride += 1
    return (start + channel * stride) % period + 1


def auto_pre_dcm(config: ScenarioConfig, wavelength_nm: float) -> float:
    """Pre-DCM that lands the channel's end-of-link residual at the window centre."""
    link = dispersion_map(config.link_elements(), wavelength_nm=wavelength_nm)[-1].cumulative_dispersion_ps_nm
    return RESIDUAL_TARGET_PS_NM - link


def channel_transmitters(config: ScenarioConfig) -> list[TransmitterSpec]:
    """Per-channel transmitter specs with wavelength, pattern seed and pre-DCM resolved."""
    plan = config.channel_plan
    specs = []
    for index in range(plan.n_channels):
        spec = plan.transmitter_for(index, config.transmitter)
        updates = {}
        if spec.prbs_seed is None:
            updates["prbs_seed"] = derive_pattern_seed(config.pattern_seed, index, spec.prbs_order)
        if spec.pre_dcm_ps_nm is None:
            updates["pre_dcm_ps_nm"] = auto_pre_dcm(config, spec.laser_wavelength_nm)
        if updates:
            spec = TransmitterSpec.model_validate({**spec.model_dump(), **updates})
        specs.append(spec)
    return specs


def _receive_channel(
    config: ScenarioConfig,
    aggregate: OpticalField,
    index: int,
    bits: BitSequence,
    channel_grid,
    rng: RngStream,
) -> ChannelReport:
    plan = config.channel_plan
    field = demux(aggregate, plan, index, config.demux.filter, config.demux.spacing_nm, channel_grid=channel_grid)
    rx_power = power_meter(field)
    wave = photodetect(field, config.receiver, rng.derive(channel=index, purpose="receiver"))
    wave = electrical_filter(wave, config.receiver)
    spb = channel_grid.samples_per_bit
    try:
        decision = decide(wave, bits, spb)
    except AlignmentError as e:
        logger.warning("channel_not_aligned", channel=index, reason=str(e))
        return ChannelReport(index, plan.wavelength_nm(index), rx_power, aligned=False, message=str(e))

    qber = q_and_ber(wave, bits, decision)
    eye = None
    if config.wants("eye"):
        eye = eye_diagram(wave, spb, decision, n_amplitude_bins=config.output.eye_amplitude_bins)
    logger.info(
        "channel_received",
        channel=index,
        rx_power_dbm=round(rx_power, 3),
        q_db=round(qber.q_db, 3),
        ber_estimated=qber.ber_estimated,
        errors=qber.n_errors,
    )
    return ChannelReport(index, plan.wavelength_nm(index), rx_power, aligned=True, qber=qber, eye=eye)


def run_scenario(config: ScenarioConfig, threads: int = 1, sweep_index: int = 0) -> MetricsReport:
    """
    transmitters -> mux -> spans -> demux -> receivers -> metrics.

    Alignment failures are recorded per channel and never abort the run.
    """
    started = time.perf_counter()
    plan = config.channel_plan
    n_bits = config.grid.n_bits
    spb = config.grid.samples_per_bit
    rng = RngStream(master_seed=config.master_seed, scenario=config.name, sweep_index=sweep_index)

    transmitters = channel_transmitters(config)
    channel_grid = make_grid(n_bits * spb, transmitters[0].bit_rate, spb, plan.center_wavelength)
    built = _map(lambda spec: transmit(spec, channel_grid, n_bits), transmitters, threads)
    fields = [field for field, _ in built]
    patterns = [bits for _, bits in built]

    grid = aggregate_grid(plan, channel_grid)
    aggregate = mux(fields, plan, grid)
    tx_spectrum = spectrum(aggregate, config.output.spectrum_rbw_ghz * 1e9) if config.wants("spectrum") else None

    elements = config.link_elements()
    boundary_powers = [power_meter(aggregate)]
    aggregate = propagate_link(
        aggregate,
        elements,
        config.step_control,
        rng,
        monitor=lambda distance, field, label: boundary_powers.append(power_meter(field)),
    )
    rx_spectrum = spectrum(aggregate, config.output.spectrum_rbw_ghz * 1e9) if config.wants("spectrum") else None

    channels = _map(
        lambda index: _receive_channel(config, aggregate, index, patterns[index], channel_grid, rng),
        range(plan.n_channels),
        threads,
    )

    pre_dcm = transmitters[0].pre_dcm_ps_nm or 0.0
    per_km = config.output.per_km_maps
    dmap = dispersion_map(elements, pre_dcm, per_km=per_km) if config.wants("dispersion_map") else []
    pmap = power_map(elements, boundary_powers, plan.n_channels, per_km=per_km) if config.wants("power_map") else []
    report = MetricsReport(
        scenario=config.name,
        channels=tuple(channels),
        dispersion_map=tuple(dmap),
        residual_dispersion=tuple(residual_dispersion(plan, elements, transmitters)),
        power_map=tuple(pmap),
        tx_spectrum=tx_spectrum,
        rx_spectrum=rx_spectrum,
        master_seed=config.master_seed,
        config_hash=config_hash(config),
        link_length_km=config.link_length_km,
        wall_time_s=time.perf_counter() - started,
    )
    logger.info(
        "scenario_done",
        scenario=config.name,
        channels=plan.n_channels,
        aligned=report.aligned_count,
        worst_q_db=round(report.worst_q_db, 3) if report.aligned_count else None,
        wall_time_s=round(report.wall_time_s, 2),
    )
    return report


def run_sweep(
    config: ScenarioConfig,
    directive: SweepDirective | None = None,
    threads: int = 1,
    progress: bool = False,
) -> SweepResult:
    """
    One run_scenario per directive value, ordered by value.

    Each point's noise streams are keyed by its index in that order, so results do not
    depend on how many points run at once.

    Raises:
        ConfigError: no directive, fewer than two values, or an unresolvable parameter path
    """
    directive = directive or config.sweep
    if directive is None:
        raise ConfigError(f"{config.name}: no sweep directive given")
    if len(directive.values) < 2:
        raise ConfigError(f"sweep over '{directive.param}' needs at least 2 values")
    values = sorted(directive.values)
    point_configs = [with_overrides(config, {directive.param: value}) for value in values]

    def run_point(item):
        index, point_config = item
        report = run_scenario(point_config, threads=1, sweep_index=index)
        logger.info("sweep_point_done", param=directive.param, value=values[index], worst_q_db=report.worst_q_db)
        return report

    items = list(enumerate(point_configs))
    with tqdm(total=len(items), desc=f"sweep {directive.param}", disable=not progress) as bar:
        def tracked(item):
            report = run_point(item)
            bar.update(1)
            return report

        reports = _map(tracked, items, threads)

    return SweepResult(
        scenario=config.name,
        param=directive.param,
        points=tuple(SweepPoint(value, report) for value, report in zip(values, reports)),
        config_hash=config_hash(config),
    )


def q_uncertainty(config: ScenarioConfig, n_repeats: int = 8, threads: int = 1) -> QUncertainty:
    """
    Spread of Q (dB) over independent noise seeds with the data pattern held fixed.
    The reported spread is the worst over channels.
    """
    if n_repeats < MIN_Q_REPEATS:
        raise ParameterError(f"q_uncertainty needs at least {MIN_Q_REPEATS} repeats, got {n_repeats}")
    seeds = [config.master_seed + repeat for repeat in range(n_repeats)]
    reports = _map(lambda seed: run_scenario(config.model_copy(update={"master_seed": seed})), seeds, threads)
    q_db = np.array([[channel.q_db for channel in report.channels] for report in reports])
    spread = max(q_spread_db(q_db[:, column]) for column in range(q_db.shape[1]))
    logger.info("q_uncertainty", repeats=n_repeats, n_bits=config.grid.n_bits, spread_db=round(spread, 4))
    return QUncertainty(spread_db=spread, q_db=q_db, n_bits=config.grid.n_bits)


def sweep_rows(result: SweepResult) -> list[dict]:
    """Summary row per sweep value."""
    rows = []
    for point in result.points:
        report = point.report
        aligned = [c for c in report.channels if c.aligned]
        rows.append(
            {
                "value": point.value,
                "worst_q_db": report.worst_q_db,
                "mean_q_db": float(np.mean([c.q_db for c in aligned])) if aligned else math.nan,
                "worst_ber_estimated": report.worst_ber,
                "aligned_channels": report.aligned_count,
                "n_channels": len(report.channels),
            }
        )
    return rows


def best_value(result: SweepResult) -> float:
    """Sweep value with the best worst-channel Q."""
    scored = [(p.report.worst_q_db, -i, p.value) for i, p in enumerate(result.points)]
    scored = [s for s in scored if not math.isnan(s[0])]
    if not scored:
        raise ParameterError(f"no sweep point of '{result.param}' has an aligned channel")
    return max(scored)[2]


def channel_reports(result: SweepResult) -> Sequence[tuple[float, ChannelReport]]:
    return [(p.value, c) for p in result.points for c in p.report.channels]
