"""
WDM multiplexer and demultiplexer on a shared aggregate grid.

Channel carriers and demux filter centres are snapped to whole FFT bins of the aggregate
grid, so frequency shifts are exact spectral rolls.
"""

from __future__ import annotations

import math
from typing import Literal, Sequence

import numpy as np
import structlog
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator
from scipy import fft

from core_simulation.errors import GridError, ParameterError
from core_simulation.signal_core import (
    GUARD_FACTOR,
    OpticalField,
    SignalGrid,
    SPEED_OF_LIGHT,
    frequency_to_wavelength,
    wavelength_spacing_to_frequency,
    wavelength_to_frequency,
)
from core_simulation.transmitter import TransmitterSpec

logger = structlog.get_logger(__name__)


def _first_error(error: ValidationError) -> str:
    item = error.errors()[0]
    location = ".".join(str(part) for part in item["loc"]) or "<root>"
    return f"{location}: {item['msg']}"


class ChannelPlan(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    n_channels: int = Field(32, ge=1)
    first_wavelength_nm: float = Field(1543.6, gt=0)
    spacing_nm: float = Field(0.4, gt=0)
    # channel index -> partial TransmitterSpec fields
    overrides: dict[int, dict] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _overrides_in_range(self):
        for index, fields in self.overrides.items():
            if not 0 <= index < self.n_channels:
                raise ValueError(f"override for channel {index} outside 0..{self.n_channels - 1}")
            if "laser_wavelength_nm" in fields:
                raise ValueError(f"channel {index}: wavelengths come from the plan, not overrides")
            try:
                TransmitterSpec.model_validate({**TransmitterSpec().model_dump(), **fields})
            except ValidationError as e:
                raise ValueError(f"channel {index} override: {_first_error(e)}") from None
        return self

    def wavelength_nm(self, index: int) -> float:
        if not 0 <= index < self.n_channels:
            raise ParameterError(f"channel index {index} outside 0..{self.n_channels - 1}")
        return self.first_wavelength_nm + index * self.spacing_nm

    def wavelengths_nm(self) -> list[float]:
        return [self.wavelength_nm(i) for i in range(self.n_channels)]

    def frequency(self, index: int) -> float:
        return wavelength_to_frequency(self.wavelength_nm(index) * 1e-9)

    @property
    def center_frequency(self) -> float:
        """Midpoint between the outermost channel carriers."""
        return 0.5 * (self.frequency(0) + self.frequency(self.n_channels - 1))

    @property
    def center_wavelength(self) -> float:
        return frequency_to_wavelength(self.center_frequency)

    @property
    def spacing_hz(self) -> float:
        return wavelength_spacing_to_frequency(self.spacing_nm * 1e-9, self.center_wavelength)

    @property
    def occupied_bandwidth_nm(self) -> float:
        return self.wavelength_nm(self.n_channels - 1) - self.first_wavelength_nm

    def transmitter_for(self, index: int, base: TransmitterSpec) -> TransmitterSpec:
        """`base` with this channel's wavelength and overrides applied (re-validated)."""
        fields = {**base.model_dump(), **self.overrides.get(index, {})}
        fields["laser_wavelength_nm"] = self.wavelength_nm(index)
        return TransmitterSpec.model_validate(fields)


class FilterSpec(BaseModel):
    """Optical band-pass; order 1 is Gaussian, higher orders are super-Gaussian (flat-top)."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    shape: Literal["gaussian", "super_gaussian"] = "super_gaussian"
    order: int = Field(2, ge=1, le=4)
    fwhm_nm: float = Field(0.3, gt=0)
    center_offset_hz: float = 0.0

    @field_validator("shape", mode="before")
    @classmethod
    def _normalise_shape(cls, shape):
        return shape.replace("-", "_") if isinstance(shape, str) else shape

    @property
    def effective_order(self) -> int:
        return 1 if self.shape == "gaussian" else self.order

    def bandwidth_hz(self, wavelength: float) -> float:
        return wavelength_spacing_to_frequency(self.fwhm_nm * 1e-9, wavelength)


def filter_power_response(filter: FilterSpec, frequencies: np.ndarray, wavelength: float) -> np.ndarray:
    bandwidth = filter.bandwidth_hz(wavelength)
    x = 2.0 * (frequencies - filter.center_offset_hz) / bandwidth
    return np.exp(-math.log(2.0) * x ** (2 * filter.effective_order))


def filter_response(filter: FilterSpec, grid: SignalGrid, wavelength: float | None = None) -> np.ndarray:
    """
    Amplitude transmission per FFT bin of `grid`, peak 1 at the filter centre.
    The FWHM is converted to Hz at `wavelength` (the grid centre when None).
    """
    wavelength = grid.center_wavelength if wavelength is None else wavelength
    power = filter_power_response(filter, grid.frequency_axis(), wavelength)
    return np.sqrt(power)


def aggregate_grid(plan: ChannelPlan, channel_grid: SignalGrid) -> SignalGrid:
    """
    Channel grid upsampled by the smallest power of two whose sample rate covers
    the plan's occupied band with the guard factor.
    """
    required = GUARD_FACTOR * plan.n_channels * plan.spacing_hz
    factor = 1
    while channel_grid.sample_rate * factor < required:
        factor *= 2
    grid = channel_grid.upsampled(factor, center_wavelength=plan.center_wavelength)
    logger.debug("aggregate_grid", factor=factor, n_samples=grid.n_samples, sample_rate_hz=grid.sample_rate)
    return grid


def _signed_bins(n: int) -> np.ndarray:
    """Signed bin indices in FFT order: 0..n/2-1, -n/2..-1."""
    return np.concatenate([np.arange(n // 2), np.arange(-(n // 2), 0)])


def _offset_bin(frequency: float, grid: SignalGrid) -> int:
    return int(round((frequency - grid.center_frequency) / grid.frequency_bin))


def _embed(spectrum: np.ndarray, n_out: int, shift: int) -> np.ndarray:
    """
    Place a narrow-grid spectrum onto an `n_out`-bin grid, moved by `shift` bins.
    Bins landing outside the wide grid's band are dropped.
    """
    signed = _signed_bins(spectrum.size) + shift
    keep = (signed >= -(n_out // 2)) & (signed < n_out // 2)
    out = np.zeros(n_out, dtype=np.complex128)
    out[signed[keep] % n_out] = spectrum[keep]
    return out


def _extract(spectrum: np.ndarray, n_out: int, shift: int) -> np.ndarray:
    """Inverse of `_embed`: read the `n_out` bins centred `shift` bins off baseband."""
    signed = _signed_bins(n_out) + shift
    keep = (signed >= -(spectrum.size // 2)) & (signed < spectrum.size // 2)
    out = np.zeros(n_out, dtype=np.complex128)
    out[keep] = spectrum[signed[keep] % spectrum.size]
    return out


def mux(fields: Sequence[OpticalField], plan: ChannelPlan, aggregate: SignalGrid) -> OpticalField:
    """
    Shift each channel to its plan slot relative to the aggregate centre and sum.

    Raises:
        GridError: a carrier falls outside the aggregate band or grid windows disagree
    """
    if len(fields) != plan.n_channels:
        raise ParameterError(f"{len(fields)} fields for a {plan.n_channels}-channel plan")
    n_out = aggregate.n_samples
    total = np.zeros(n_out, dtype=np.complex128)
    for index, field in enumerate(fields):
        if not math.isclose(field.grid.time_window, aggregate.time_window, rel_tol=1e-12):
            raise GridError(f"channel {index} time window differs from the aggregate grid")
        shift = _offset_bin(plan.frequency(index), aggregate)
        if abs(shift) >= n_out // 2:
            raise GridError(f"channel {index} lies outside the aggregate band")
        scale = n_out / field.grid.n_samples
        total += _embed(fft.fft(field.samples), n_out, shift) * scale
    return OpticalField(samples=fft.ifft(total), grid=aggregate, center_frequency=aggregate.center_frequency)


def demux(
    aggregate: OpticalField,
    plan: ChannelPlan,
    channel_index: int,
    filter: FilterSpec,
    demux_spacing_nm: float | None = None,
    channel_grid: SignalGrid | None = None,
) -> OpticalField:
    """
    Filter one channel out of the aggregate and bring it back to its own baseband grid.

    Filter centres sit at first_wavelength + channel_index * demux_spacing, so a spacing
    different from the plan detunes the whole filter bank from the carriers.
    """
    if not 0 <= channel_index < plan.n_channels:
        raise ParameterError(f"channel index {channel_index} outside 0..{plan.n_channels - 1}")
    grid = aggregate.grid
    channel_grid = channel_grid or grid
    spacing_nm = plan.spacing_nm if demux_spacing_nm is None else demux_spacing_nm
    if spacing_nm <= 0:
        raise ParameterError(f"demux spacing must be positive, got {spacing_nm}")

    filter_wavelength = (plan.first_wavelength_nm + channel_index * spacing_nm) * 1e-9
    filter_bin = _offset_bin(wavelength_to_frequency(filter_wavelength), grid)
    centred = filter.model_copy(update={"center_offset_hz": filter_bin * grid.frequency_bin})
    filtered = fft.fft(aggregate.samples) * filter_response(centred, grid, filter_wavelength)

    carrier_bin = _offset_bin(plan.frequency(channel_index), grid)
    band = _extract(filtered, channel_grid.n_samples, carrier_bin) * (channel_grid.n_samples / grid.n_samples)
    return OpticalField(
        samples=fft.ifft(band),
        grid=channel_grid,
        center_frequency=grid.center_frequency + carrier_bin * grid.frequency_bin,
    )


def filter_bank_centres_hz(plan: ChannelPlan, grid: SignalGrid, demux_spacing_nm: float | None = None) -> np.ndarray:
    """Snapped absolute centre frequency of every demux filter."""
    spacing_nm = plan.spacing_nm if demux_spacing_nm is None else demux_spacing_nm
    centres = []
    for index in range(plan.n_channels):
        frequency = SPEED_OF_LIGHT / ((plan.first_wavelength_nm + index * spacing_nm) * 1e-9)
        centres.append(grid.center_frequency + _offset_bin(frequency, grid) * grid.frequency_bin)
    return np.array(centres)
