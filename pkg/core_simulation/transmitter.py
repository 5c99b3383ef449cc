"""
Channel transmitter: PRBS bits -> NRZ drive -> intensity-modulated CW laser -> pre-DCM.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import structlog
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from scipy import fft, ndimage

from core_simulation.errors import GridError, ParameterError
from core_simulation.signal_core import (
    OpticalField,
    SignalGrid,
    accumulated_beta2,
    db_to_linear,
    power_dbm_to_watts,
    wavelength_to_frequency,
)

logger = structlog.get_logger(__name__)

# Fibonacci LFSR feedback taps (x^m + x^k + 1) for maximal-length sequences
PRBS_TAPS = {7: 6, 9: 5, 11: 9, 15: 14, 23: 18, 31: 28}

# 10-90% rise of a raised-cosine edge spans this fraction of the full edge
_RAISED_COSINE_10_90 = (math.acos(-0.8) - math.acos(0.8)) / math.pi

DEFAULT_RISE_FRACTION = 0.25


class TransmitterSpec(BaseModel):
    """Per-channel transmitter settings, in engineering units."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    bit_rate_gbps: float = Field(40.0, gt=0)
    prbs_order: int = Field(7, ge=7, le=31)
    prbs_seed: int | None = Field(None, gt=0)
    laser_power_dbm: float = -12.0
    laser_wavelength_nm: float = Field(1550.0, gt=0)
    extinction_ratio_db: float = Field(30.0, gt=0)
    rise_time_ps: float | None = Field(None, ge=0)
    # None selects the value that centres the end-of-link residual (resolved by the runner)
    pre_dcm_ps_nm: float | None = 0.0

    @field_validator("prbs_order")
    @classmethod
    def _known_polynomial(cls, order: int) -> int:
        if order not in PRBS_TAPS:
            raise ValueError(f"no feedback polynomial for PRBS order {order}; use one of {sorted(PRBS_TAPS)}")
        return order

    @model_validator(mode="after")
    def _rise_shorter_than_bit(self):
        if self.rise_time_ps is not None and self.rise_time_ps * 1e-12 >= self.bit_period:
            raise ValueError(f"rise_time_ps={self.rise_time_ps} must be shorter than the bit period")
        if self.prbs_seed is not None and self.prbs_seed % (1 << self.prbs_order) == 0:
            raise ValueError(f"prbs_seed={self.prbs_seed} leaves the order-{self.prbs_order} register empty")
        return self

    @property
    def bit_rate(self) -> float:
        return self.bit_rate_gbps * 1e9

    @property
    def bit_period(self) -> float:
        return 1.0 / self.bit_rate

    @property
    def rise_time(self) -> float:
        if self.rise_time_ps is None:
            return DEFAULT_RISE_FRACTION * self.bit_period
        return self.rise_time_ps * 1e-12

    @property
    def laser_wavelength(self) -> float:
        return self.laser_wavelength_nm * 1e-9

    @property
    def seed(self) -> int:
        """LFSR seed; all-ones register when none is configured."""
        if self.prbs_seed is None:
            return (1 << self.prbs_order) - 1
        return self.prbs_seed


@dataclass(frozen=True, eq=False)
class BitSequence:
    bits: np.ndarray

    def __post_init__(self):
        bits = np.array(self.bits, dtype=np.uint8)
        if bits.ndim != 1 or bits.size < 1:
            raise ParameterError("a bit sequence needs at least one bit")
        if np.any(bits > 1):
            raise ParameterError("bit values must be 0 or 1")
        bits.setflags(write=False)
        object.__setattr__(self, "bits", bits)

    @property
    def length(self) -> int:
        return int(self.bits.size)

    @property
    def ones(self) -> int:
        return int(self.bits.sum())

    def __len__(self) -> int:
        return self.length


def prbs_generate(order: int, seed: int, n_bits: int) -> BitSequence:
    """
    Maximal-length LFSR output, cycled or truncated to `n_bits`.

    Raises:
        ParameterError: unsupported order, zero seed, n_bits < 1
    """
    if order not in PRBS_TAPS:
        raise ParameterError(f"unsupported PRBS order {order}")
    mask = (1 << order) - 1
    state = seed & mask
    if state == 0:
        raise ParameterError("PRBS seed must be nonzero (an empty register locks the LFSR)")
    if n_bits < 1:
        raise ParameterError(f"n_bits must be >= 1, got {n_bits}")

    tap = PRBS_TAPS[order]
    period = mask
    one_period = np.empty(min(n_bits, period), dtype=np.uint8)
    for i in range(one_period.size):
        bit = ((state >> (order - 1)) ^ (state >> (tap - 1))) & 1
        state = ((state << 1) | bit) & mask
        one_period[i] = bit

    if n_bits <= period:
        return BitSequence(one_period)
    return BitSequence(np.resize(one_period, n_bits))


def _edge_kernel(rise_time: float, sample_interval: float) -> np.ndarray:
    """Sampled derivative of a raised-cosine step whose 10-90% rise is `rise_time`."""
    edge = rise_time / _RAISED_COSINE_10_90
    half = int(math.floor(edge / (2.0 * sample_interval)))
    if half == 0:
        return np.ones(1)
    t = np.arange(-half, half + 1) * sample_interval
    kernel = np.sin(np.pi * (t + edge / 2.0) / edge)
    return kernel / kernel.sum()


def nrz_waveform(bits: BitSequence, grid: SignalGrid, rise_time: float) -> np.ndarray:
    """
    Normalised NRZ drive (0..1) with raised-cosine transitions.

    The bit levels are held for a full bit and every transition follows a raised-cosine
    edge of the given 10-90% rise time. The waveform is periodic over the grid.
    """
    bit_period = grid.samples_per_bit * grid.sample_interval
    if rise_time >= bit_period:
        raise ParameterError(f"rise time {rise_time:.3e} s is not shorter than the bit period {bit_period:.3e} s")
    if bits.length * grid.samples_per_bit != grid.n_samples:
        raise GridError(f"{bits.length} bits do not fill a grid of {grid.n_bits} bits")

    levels = np.repeat(bits.bits.astype(np.float64), grid.samples_per_bit)
    kernel = _edge_kernel(rise_time, grid.sample_interval)
    if kernel.size == 1:
        return levels
    drive = ndimage.convolve1d(levels, kernel, mode="wrap")
    return np.clip(drive, 0.0, 1.0)


def level_powers(laser_power_dbm: float, extinction_ratio_db: float) -> tuple[float, float]:
    """(P_one, P_zero) in W for a balanced pattern averaging `laser_power_dbm`."""
    average = power_dbm_to_watts(laser_power_dbm)
    if math.isinf(extinction_ratio_db):
        return 2.0 * average, 0.0
    ratio = db_to_linear(extinction_ratio_db)
    p_one = 2.0 * average * ratio / (ratio + 1.0)
    return p_one, p_one / ratio


def modulate(
    cw_power_dbm: float,
    drive: np.ndarray,
    extinction_ratio_db: float,
    grid: SignalGrid,
    center_frequency: float | None = None,
) -> OpticalField:
    """Chirp-free intensity modulation of a CW laser by a 0..1 drive."""
    drive = np.asarray(drive, dtype=np.float64)
    if drive.shape != (grid.n_samples,):
        raise GridError(f"drive has {drive.size} samples, grid expects {grid.n_samples}")
    if drive.min() < -1e-12 or drive.max() > 1.0 + 1e-12:
        raise ParameterError("modulator drive must stay within [0, 1]")

    p_one, p_zero = level_powers(cw_power_dbm, extinction_ratio_db)
    power = p_zero + (p_one - p_zero) * np.clip(drive, 0.0, 1.0)
    return OpticalField(
        samples=np.sqrt(power).astype(np.complex128),
        grid=grid,
        center_frequency=center_frequency or grid.center_frequency,
    )


def apply_dcm(field: OpticalField, cumulative_dispersion: float) -> OpticalField:
    """Lossless all-pass dispersion of `cumulative_dispersion` ps/nm at the field's wavelength."""
    if cumulative_dispersion == 0:
        return field
    beta2_length = accumulated_beta2(cumulative_dispersion, field.wavelength)
    omega = field.grid.angular_frequency()
    response = np.exp(1j * (beta2_length / 2.0) * omega**2)
    return field.with_samples(fft.ifft(fft.fft(field.samples) * response))


def transmit(
    spec: TransmitterSpec, grid: SignalGrid, n_bits: int, bits: BitSequence | None = None
) -> tuple[OpticalField, BitSequence]:
    """Build a channel and return it together with the bits it carries."""
    if not math.isclose(grid.bit_rate, spec.bit_rate, rel_tol=1e-12):
        raise GridError(f"grid bit rate {grid.bit_rate:.6g} Hz does not match transmitter {spec.bit_rate:.6g} Hz")
    if grid.n_bits != n_bits:
        raise GridError(f"grid holds {grid.n_bits} bits, {n_bits} requested")
    if bits is None:
        bits = prbs_generate(spec.prbs_order, spec.seed, n_bits)
    elif bits.length != n_bits:
        raise ParameterError(f"{bits.length} forced bits, {n_bits} requested")

    drive = nrz_waveform(bits, grid, spec.rise_time)
    field = modulate(
        spec.laser_power_dbm,
        drive,
        spec.extinction_ratio_db,
        grid,
        center_frequency=wavelength_to_frequency(spec.laser_wavelength),
    )
    field = apply_dcm(field, spec.pre_dcm_ps_nm or 0.0)
    logger.debug(
        "channel_built",
        wavelength_nm=spec.laser_wavelength_nm,
        n_bits=n_bits,
        mean_power_w=field.mean_power,
        pre_dcm_ps_nm=spec.pre_dcm_ps_nm,
    )
    return field, bits


def build_channel(
    spec: TransmitterSpec, grid: SignalGrid, n_bits: int, bits: BitSequence | None = None
) -> OpticalField:
    """prbs -> nrz -> modulate -> pre-DCM for one channel."""
    field, _ = transmit(spec, grid, n_bits, bits)
    return field
