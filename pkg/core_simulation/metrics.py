"""
Analyzer suite: Q-factor and BER, eye diagrams, optical spectrum, power meter, and the
dispersion and power ledgers along the link.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import structlog
from scipy import fft, signal, special

from core_simulation.errors import ParameterError
from core_simulation.fiber_engine import AmplifierSpec, DcmSpec, FiberSpec, LinkElement
from core_simulation.receiver import DecisionResult, ElectricalWaveform, level_statistics, q_value
from core_simulation.signal_core import OpticalField, watts_to_dbm
from core_simulation.transmitter import BitSequence, TransmitterSpec
from core_simulation.wdm import ChannelPlan

logger = structlog.get_logger(__name__)

MIN_LEVEL_SAMPLES = 8
MIN_COUNTED_ERRORS = 10
MIN_EYE_BITS = 64
EYE_WINDOW_FRACTION = 0.1
DEFAULT_AMPLITUDE_BINS = 64


@dataclass(frozen=True)
class QberResult:
    q_linear: float
    q_db: float
    ber_estimated: float
    ber_counted: float
    countable: bool
    n_errors: int
    n_bits: int
    mu_one: float
    mu_zero: float
    sigma_one: float
    sigma_zero: float


@dataclass(frozen=True, eq=False)
class EyeData:
    traces: np.ndarray
    amplitude_edges: np.ndarray
    eye_opening: float
    optimal_phase: float
    samples_per_bit: int


@dataclass(frozen=True, eq=False)
class Spectrum:
    frequency: np.ndarray
    psd: np.ndarray
    resolution_bandwidth: float

    @property
    def bin_width(self) -> float:
        return float(self.frequency[1] - self.frequency[0])

    @property
    def integrated_power(self) -> float:
        return float(self.psd.sum() * self.bin_width)


@dataclass(frozen=True)
class DispersionMapPoint:
    distance_km: float
    cumulative_dispersion_ps_nm: float
    element_label: str
    pre_compensation_ps_nm: float = 0.0

    @property
    def link_dispersion_ps_nm(self) -> float:
        """Cumulative dispersion of the link elements alone, without the pre-DCM."""
        return self.cumulative_dispersion_ps_nm - self.pre_compensation_ps_nm


@dataclass(frozen=True)
class PowerMapPoint:
    distance_km: float
    total_power_dbm: float
    per_channel_power_dbm: float
    element_label: str


@dataclass(frozen=True)
class ResidualDispersion:
    channel_index: int
    wavelength_nm: float
    link_dispersion_ps_nm: float
    pre_dcm_ps_nm: float

    @property
    def final_dispersion_ps_nm(self) -> float:
        return self.link_dispersion_ps_nm + self.pre_dcm_ps_nm


def ber_from_q(q_linear: float) -> float:
    if math.isinf(q_linear):
        return 0.0
    return float(0.5 * special.erfc(q_linear / math.sqrt(2.0)))


def q_and_ber(wave: ElectricalWaveform, bits: BitSequence, decision: DecisionResult) -> QberResult:
    """
    Mark/space statistics at the decision phase, Gaussian BER estimate and counted BER.

    Raises:
        ParameterError: fewer than 8 marks or 8 spaces
    """
    aligned = decision.aligned_bits
    if aligned.size != bits.length:
        raise ParameterError(f"decision covers {aligned.size} bits, reference has {bits.length}")
    n_marks = int(aligned.sum())
    n_spaces = aligned.size - n_marks
    if n_marks < MIN_LEVEL_SAMPLES or n_spaces < MIN_LEVEL_SAMPLES:
        raise ParameterError(f"{n_marks} marks and {n_spaces} spaces; need at least {MIN_LEVEL_SAMPLES} of each")

    sampled = wave.by_bit(decision.samples_per_bit)[:, decision.phase]
    mu_one, mu_zero, sigma_one, sigma_zero = level_statistics(sampled, aligned)
    q = q_value(mu_one, mu_zero, sigma_one, sigma_zero)
    q_db = 20.0 * math.log10(q) if q > 0 else -math.inf
    return QberResult(
        q_linear=q,
        q_db=q_db,
        ber_estimated=ber_from_q(q),
        ber_counted=decision.n_errors / aligned.size,
        countable=decision.n_errors >= MIN_COUNTED_ERRORS,
        n_errors=decision.n_errors,
        n_bits=int(aligned.size),
        mu_one=mu_one,
        mu_zero=mu_zero,
        sigma_one=sigma_one,
        sigma_zero=sigma_zero,
    )


def q_spread_db(q_db_values: Sequence[float]) -> float:
    """max - min of Q in dB; identical values (including infinite ones) spread by 0."""
    values = np.asarray(q_db_values, dtype=np.float64)
    if values.size == 0:
        raise ParameterError("no Q values to compare")
    if np.all(values == values[0]):
        return 0.0
    return float(values.max() - values.min())


def _window_samples(columns: np.ndarray, phase: int, delta: int) -> np.ndarray:
    """Sample `delta` positions from each bit's decision instant, wrapping across bits."""
    flat = columns.reshape(-1)
    spb = columns.shape[1]
    index = (np.arange(columns.shape[0]) * spb + phase + delta) % flat.size
    return flat[index]


def _eye_gap(columns: np.ndarray, labels: np.ndarray, phase: int) -> float:
    spb = columns.shape[1]
    half = int(math.floor(EYE_WINDOW_FRACTION * spb))
    marks = labels == 1
    if marks.all() or not marks.any():
        return 0.0
    gaps = []
    for delta in range(-half, half + 1):
        samples = _window_samples(columns, phase, delta)
        gaps.append(samples[marks].min() - samples[~marks].max())
    return float(min(gaps))


def eye_diagram(
    wave: ElectricalWaveform,
    samples_per_bit: int,
    decision: DecisionResult | None = None,
    n_amplitude_bins: int = DEFAULT_AMPLITUDE_BINS,
) -> EyeData:
    """
    Fold the waveform into a two-bit window centred on the sampling phase.

    Marks and spaces are labelled by the decision's aligned bits when given, otherwise
    by each phase's mean level. The opening is the worst mark/space gap over the central
    20% of the bit, floored at 0.

    Raises:
        ParameterError: fewer than 64 bits
    """
    columns = wave.by_bit(samples_per_bit)
    n_bits = columns.shape[0]
    if n_bits < MIN_EYE_BITS:
        raise ParameterError(f"eye diagram needs at least {MIN_EYE_BITS} bits, got {n_bits}")

    if decision is not None:
        phase = decision.phase
        opening = _eye_gap(columns, decision.aligned_bits, phase)
    else:
        gaps = [
            _eye_gap(columns, (columns[:, p] > columns[:, p].mean()).astype(np.uint8), p)
            for p in range(samples_per_bit)
        ]
        phase = int(np.argmax(gaps))
        opening = gaps[phase]

    samples = wave.samples
    positions = (np.arange(samples.size) - phase + samples_per_bit) % (2 * samples_per_bit)
    low, high = float(samples.min()), float(samples.max())
    if high == low:
        high = low + 1e-12
    edges = np.linspace(low, high, n_amplitude_bins + 1)
    traces, _, _ = np.histogram2d(
        positions, samples, bins=[np.arange(2 * samples_per_bit + 1) - 0.5, edges]
    )
    return EyeData(
        traces=traces.astype(np.int64),
        amplitude_edges=edges,
        eye_opening=max(opening, 0.0),
        optimal_phase=phase / samples_per_bit,
        samples_per_bit=samples_per_bit,
    )


def spectrum(field: OpticalField, resolution_bandwidth: float) -> Spectrum:
    """
    Segment-averaged Hann periodogram at (about) the requested resolution bandwidth.

    Segments of 2^k samples hop by a quarter segment around the periodic record, so every
    sample carries the same total window weight and the integrated PSD equals the mean power.

    Raises:
        ParameterError: resolution bandwidth below the grid's frequency bin
    """
    grid = field.grid
    if resolution_bandwidth < grid.frequency_bin * (1.0 - 1e-9):
        raise ParameterError(
            f"resolution bandwidth {resolution_bandwidth:.4g} Hz is below the bin spacing {grid.frequency_bin:.4g} Hz"
        )
    n = grid.n_samples
    nperseg = 2 ** int(math.floor(math.log2(grid.sample_rate / resolution_bandwidth) + 1e-9))
    nperseg = int(min(max(nperseg, 4), n))
    hop = nperseg // 4

    # wrap the record so the last segments close the period
    extended = np.concatenate([field.samples, field.samples[: nperseg - hop]])
    freqs, psd = signal.welch(
        extended,
        fs=grid.sample_rate,
        window="hann",
        nperseg=nperseg,
        noverlap=nperseg - hop,
        detrend=False,
        return_onesided=False,
        scaling="density",
    )
    return Spectrum(
        frequency=fft.fftshift(freqs) + field.center_frequency,
        psd=fft.fftshift(psd),
        resolution_bandwidth=grid.sample_rate / nperseg,
    )


def spectral_peaks(spec: Spectrum, prominence_db: float = 10.0, count: int | None = None) -> np.ndarray:
    """
    Ascending frequencies of peaks standing `prominence_db` above their surroundings,
    limited to the `count` strongest when given.
    """
    level = 10.0 * np.log10(np.maximum(spec.psd, 1e-300))
    peaks, _ = signal.find_peaks(level, prominence=prominence_db)
    if count is not None:
        peaks = np.sort(peaks[np.argsort(level[peaks])[::-1][:count]])
    return spec.frequency[peaks]


def power_meter(field: OpticalField) -> float:
    """Mean power in dBm; a zero field reads -inf."""
    return watts_to_dbm(field.mean_power)


def dispersion_map(
    elements: Sequence[LinkElement],
    pre_compensation_ps_nm: float = 0.0,
    per_km: bool = False,
    wavelength_nm: float | None = None,
) -> list[DispersionMapPoint]:
    """
    Running sum of D L over fibers plus lumped DCM constants, at every element boundary
    (and each whole km inside fibers when `per_km`).
    """
    pre = pre_compensation_ps_nm
    distance = 0.0
    cumulative = pre
    points = [DispersionMapPoint(0.0, cumulative, "TX" if pre == 0 else "pre-DCM", pre)]
    for element in elements:
        if isinstance(element, FiberSpec):
            dispersion = element.dispersion_at(wavelength_nm)
            if per_km:
                for km in range(1, int(math.ceil(element.length_km))):
                    points.append(DispersionMapPoint(distance + km, cumulative + dispersion * km, element.label, pre))
            distance += element.length_km
            cumulative += dispersion * element.length_km
        elif isinstance(element, DcmSpec):
            cumulative += element.dispersion_ps_nm
        elif not isinstance(element, AmplifierSpec):
            raise ParameterError(f"unknown link element {element!r}")
        points.append(DispersionMapPoint(distance, cumulative, element.label, pre))
    return points


def residual_dispersion(
    plan: ChannelPlan, elements: Sequence[LinkElement], transmitters: Sequence[TransmitterSpec]
) -> list[ResidualDispersion]:
    """End-of-link cumulative dispersion per channel, slope included."""
    rows = []
    for index, spec in enumerate(transmitters):
        wavelength = plan.wavelength_nm(index)
        link = dispersion_map(elements, wavelength_nm=wavelength)[-1].cumulative_dispersion_ps_nm
        rows.append(ResidualDispersion(index, wavelength, link, spec.pre_dcm_ps_nm or 0.0))
    return rows


def power_map(
    elements: Sequence[LinkElement],
    boundary_powers_dbm: Sequence[float],
    n_channels: int,
    per_km: bool = True,
) -> list[PowerMapPoint]:
    """
    Power along the link from measured boundary powers (launch first, then one reading
    after each element); points inside fibers follow the loss law.
    """
    if len(boundary_powers_dbm) != len(elements) + 1:
        raise ParameterError(
            f"{len(boundary_powers_dbm)} power readings for {len(elements)} elements; need one more than elements"
        )
    channel_offset = 10.0 * math.log10(n_channels)
    distance = 0.0
    points = [PowerMapPoint(0.0, boundary_powers_dbm[0], boundary_powers_dbm[0] - channel_offset, "TX")]
    for element, before, after in zip(elements, boundary_powers_dbm[:-1], boundary_powers_dbm[1:]):
        if isinstance(element, FiberSpec):
            if per_km:
                for km in range(1, int(math.ceil(element.length_km))):
                    total = before - element.attenuation_db_per_km * km
                    points.append(PowerMapPoint(distance + km, total, total - channel_offset, element.label))
            distance += element.length_km
        points.append(PowerMapPoint(distance, after, after - channel_offset, element.label))
    return points
