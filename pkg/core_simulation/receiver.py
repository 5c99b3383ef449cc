"""
Direct-detection receiver: square-law photodiode with shot and thermal noise, electrical
low-pass, then sampling-phase, bit-alignment and threshold selection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np
import structlog
from pydantic import BaseModel, ConfigDict, Field
from scipy import fft, signal

from core_simulation.errors import AlignmentError, GridError, ParameterError
from core_simulation.signal_core import ELECTRON_CHARGE, OpticalField, RngStream, SignalGrid
from core_simulation.transmitter import BitSequence

logger = structlog.get_logger(__name__)

DEFAULT_BANDWIDTH_FRACTION = 0.75
MIN_ALIGNMENT_CORRELATION = 0.5
SIGMA_FLOOR = 1e-6


class ReceiverSpec(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    responsivity_a_per_w: float = Field(1.0, gt=0, le=1.5)
    thermal_noise_pa_rthz: float = Field(10.0, ge=0)
    # None means 0.75 x bit rate
    electrical_bandwidth_ghz: float | None = Field(None, gt=0)
    electrical_filter: Literal["bessel", "gaussian"] = "bessel"
    filter_order: int = Field(4, ge=1, le=8)
    dark_current_na: float = Field(10.0, ge=0)
    shot_noise: bool = True

    @property
    def thermal_noise_density(self) -> float:
        """A/sqrt(Hz)."""
        return self.thermal_noise_pa_rthz * 1e-12

    @property
    def dark_current(self) -> float:
        return self.dark_current_na * 1e-9

    def bandwidth_hz(self, bit_rate: float) -> float:
        if self.electrical_bandwidth_ghz is None:
            return DEFAULT_BANDWIDTH_FRACTION * bit_rate
        return self.electrical_bandwidth_ghz * 1e9

    @property
    def noiseless(self) -> bool:
        return not self.shot_noise and self.thermal_noise_pa_rthz == 0


@dataclass(frozen=True, eq=False)
class ElectricalWaveform:
    samples: np.ndarray
    grid: SignalGrid

    def __post_init__(self):
        samples = np.array(self.samples, dtype=np.float64)
        if samples.shape != (self.grid.n_samples,):
            raise GridError(f"waveform has {samples.size} samples, grid expects {self.grid.n_samples}")
        if not np.all(np.isfinite(samples)):
            raise ParameterError("electrical waveform contains non-finite samples")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)

    def by_bit(self, samples_per_bit: int) -> np.ndarray:
        """View as (n_bits, samples_per_bit); column p is sampling phase p."""
        if self.samples.size % samples_per_bit:
            raise GridError(f"{self.samples.size} samples do not split into bits of {samples_per_bit}")
        return self.samples.reshape(-1, samples_per_bit)


@dataclass(frozen=True, eq=False)
class DecisionResult:
    phase: int
    bit_offset: int
    threshold: float
    decisions: np.ndarray
    aligned_bits: np.ndarray
    n_errors: int
    correlation: float
    samples_per_bit: int
    q_by_phase: np.ndarray

    @property
    def phase_fraction(self) -> float:
        return self.phase / self.samples_per_bit


def photodetect(
    field: OpticalField, spec: ReceiverSpec, rng: RngStream, bit_rate: float | None = None
) -> ElectricalWaveform:
    """i = R |A|^2 + I_d plus Gaussian shot and thermal noise over the electrical bandwidth."""
    responsivity = spec.responsivity_a_per_w
    current = responsivity * field.power + spec.dark_current
    bandwidth = spec.bandwidth_hz(bit_rate or field.grid.bit_rate)

    variance = np.zeros_like(current)
    if spec.shot_noise:
        variance = variance + 2.0 * ELECTRON_CHARGE * current * bandwidth
    variance = variance + spec.thermal_noise_density**2 * bandwidth
    if np.any(variance > 0):
        generator = rng.generator()
        current = current + np.sqrt(variance) * generator.standard_normal(current.size)
    return ElectricalWaveform(samples=current, grid=field.grid)


def electrical_response(spec: ReceiverSpec, grid: SignalGrid, bit_rate: float | None = None) -> np.ndarray:
    """
    Complex low-pass response per FFT bin of `grid`, normalised to 1 at DC.

    Raises:
        ParameterError: bandwidth at or above Nyquist
    """
    bandwidth = spec.bandwidth_hz(bit_rate or grid.bit_rate)
    if bandwidth >= grid.sample_rate / 2.0:
        raise ParameterError(
            f"electrical bandwidth {bandwidth:.4g} Hz is not below Nyquist {grid.sample_rate / 2.0:.4g} Hz"
        )
    freqs = grid.frequency_axis()
    if spec.electrical_filter == "gaussian":
        return np.exp(-(math.log(2.0) / 2.0) * (freqs / bandwidth) ** 2).astype(np.complex128)

    b, a = signal.bessel(spec.filter_order, 2.0 * np.pi * bandwidth, btype="low", analog=True, norm="mag")
    _, positive = signal.freqs(b, a, worN=2.0 * np.pi * np.abs(freqs))
    _, dc = signal.freqs(b, a, worN=[0.0])
    response = positive / dc[0]
    # real impulse response: H(-f) = conj(H(f))
    return np.where(freqs < 0, np.conj(response), response)


def electrical_filter(wave: ElectricalWaveform, spec: ReceiverSpec, bit_rate: float | None = None) -> ElectricalWaveform:
    response = electrical_response(spec, wave.grid, bit_rate)
    filtered = fft.ifft(fft.fft(wave.samples) * response).real
    return ElectricalWaveform(samples=filtered, grid=wave.grid)


def optimal_threshold(mu_one: float, mu_zero: float, sigma_one: float, sigma_zero: float) -> float:
    """Gaussian-optimal decision level (s0 mu1 + s1 mu0) / (s0 + s1)."""
    floor = SIGMA_FLOOR * abs(mu_one - mu_zero)
    sigma_one = max(sigma_one, floor)
    sigma_zero = max(sigma_zero, floor)
    if sigma_one + sigma_zero == 0:
        return 0.5 * (mu_one + mu_zero)
    return (sigma_zero * mu_one + sigma_one * mu_zero) / (sigma_zero + sigma_one)


def level_statistics(samples: np.ndarray, bits: np.ndarray) -> tuple[float, float, float, float]:
    """(mu1, mu0, sigma1, sigma0) of the samples under marks and spaces."""
    marks = samples[bits == 1]
    spaces = samples[bits == 0]
    if marks.size == 0 or spaces.size == 0:
        raise ParameterError("reference pattern needs both marks and spaces")
    return float(marks.mean()), float(spaces.mean()), float(marks.std()), float(spaces.std())


def q_value(mu_one: float, mu_zero: float, sigma_one: float, sigma_zero: float) -> float:
    gap = mu_one - mu_zero
    spread = sigma_one + sigma_zero
    if spread == 0:
        return math.inf if gap > 0 else 0.0
    return max(gap / spread, 0.0)


def _align(columns: np.ndarray, reference: np.ndarray) -> tuple[int, int, float]:
    """Best (phase, cyclic bit offset, normalised correlation) over all phases and offsets."""
    ref = reference - reference.mean()
    ref_norm = np.linalg.norm(ref)
    ref_spectrum = np.conj(fft.fft(ref))
    best = (0, 0, -math.inf)
    for phase in range(columns.shape[1]):
        column = columns[:, phase] - columns[:, phase].mean()
        norm = np.linalg.norm(column) * ref_norm
        if norm == 0:
            continue
        correlation = fft.ifft(fft.fft(column) * ref_spectrum).real / norm
        offset = int(np.argmax(correlation))
        if correlation[offset] > best[2]:
            best = (phase, offset, float(correlation[offset]))
    return best


def decide(
    wave: ElectricalWaveform,
    reference_bits: BitSequence,
    samples_per_bit: int,
    phase: int | None = None,
) -> DecisionResult:
    """
    Align the received bits with `reference_bits`, pick the sampling phase with the best
    Q (or use `phase`), decide with the Gaussian-optimal threshold and count errors.

    Raises:
        AlignmentError: no phase/offset reaches a correlation of 0.5
    """
    if wave.samples.size != reference_bits.length * samples_per_bit:
        raise GridError(
            f"waveform of {wave.samples.size} samples does not hold {reference_bits.length} bits "
            f"at {samples_per_bit} samples/bit"
        )
    columns = wave.by_bit(samples_per_bit)
    reference = reference_bits.bits.astype(np.float64)

    _, offset, correlation = _align(columns, reference)
    if correlation < MIN_ALIGNMENT_CORRELATION:
        raise AlignmentError(
            f"best pattern correlation {correlation:.3f} is below {MIN_ALIGNMENT_CORRELATION}"
        )
    aligned = np.roll(reference_bits.bits, offset)

    q_by_phase = np.empty(samples_per_bit)
    for p in range(samples_per_bit):
        q_by_phase[p] = q_value(*level_statistics(columns[:, p], aligned))
    if phase is None:
        phase = int(np.argmax(q_by_phase))
    elif not 0 <= phase < samples_per_bit:
        raise ParameterError(f"sampling phase {phase} outside 0..{samples_per_bit - 1}")

    sampled = columns[:, phase]
    threshold = optimal_threshold(*level_statistics(sampled, aligned))
    decisions = (sampled > threshold).astype(np.uint8)
    n_errors = int(np.count_nonzero(decisions != aligned))
    logger.debug("decided", phase=phase, bit_offset=offset, correlation=round(correlation, 4), errors=n_errors)
    return DecisionResult(
        phase=phase,
        bit_offset=offset,
        threshold=threshold,
        decisions=decisions,
        aligned_bits=aligned,
        n_errors=n_errors,
        correlation=correlation,
        samples_per_bit=samples_per_bit,
        q_by_phase=q_by_phase,
    )
