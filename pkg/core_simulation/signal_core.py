"""
Signal core for the link simulator.
Sampling lattice, complex-envelope container, unit conversions and seeded random streams
shared by every other module.
"""

from __future__ import annotations

import dataclasses
import hashlib
import math
from dataclasses import dataclass

import numpy as np
import structlog
from scipy import constants, fft

from core_simulation.errors import GridError, ParameterError, PhysicsError

logger = structlog.get_logger(__name__)

SPEED_OF_LIGHT = constants.c
PLANCK = constants.h
ELECTRON_CHARGE = constants.e

MIN_SAMPLES = 64
MIN_SAMPLES_PER_BIT = 4
GUARD_FACTOR = 1.25

# engineering unit -> SI
PS_PER_NM_KM = 1e-6  # ps/(nm km) in s/m^2
PS_PER_NM = 1e-3  # ps/nm in s/m
PS_PER_NM2_KM = 1e3  # ps/(nm^2 km) in s/m^3
PS2_PER_KM = 1e-27  # ps^2/km in s^2/m


def is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class SignalGrid:
    """Uniform time lattice every field and waveform of one simulation lives on."""

    n_samples: int
    sample_interval: float
    center_wavelength: float
    samples_per_bit: int
    bit_rate: float

    def __post_init__(self):
        if not is_power_of_two(self.n_samples) or self.n_samples < MIN_SAMPLES:
            raise GridError(f"n_samples must be a power of two >= {MIN_SAMPLES}, got {self.n_samples}")
        if self.sample_interval <= 0:
            raise GridError(f"sample_interval must be positive, got {self.sample_interval}")
        if self.center_wavelength <= 0:
            raise GridError(f"center_wavelength must be positive, got {self.center_wavelength}")
        if self.n_samples % self.samples_per_bit:
            raise GridError(
                f"samples_per_bit={self.samples_per_bit} does not divide n_samples={self.n_samples}"
            )

    @property
    def time_window(self) -> float:
        return self.n_samples * self.sample_interval

    @property
    def sample_rate(self) -> float:
        return 1.0 / self.sample_interval

    @property
    def n_bits(self) -> int:
        return self.n_samples // self.samples_per_bit

    @property
    def frequency_bin(self) -> float:
        return 1.0 / self.time_window

    @property
    def center_frequency(self) -> float:
        return wavelength_to_frequency(self.center_wavelength)

    def time_axis(self) -> np.ndarray:
        return np.arange(self.n_samples) * self.sample_interval

    def frequency_axis(self) -> np.ndarray:
        """Baseband frequencies of the FFT bins, in FFT order."""
        return fft.fftfreq(self.n_samples, self.sample_interval)

    def angular_frequency(self) -> np.ndarray:
        return 2.0 * np.pi * self.frequency_axis()

    def upsampled(self, factor: int, center_wavelength: float | None = None) -> "SignalGrid":
        """Same time window sampled `factor` times finer (used for the aggregate WDM grid)."""
        if not is_power_of_two(factor):
            raise GridError(f"upsampling factor must be a power of two, got {factor}")
        return dataclasses.replace(
            self,
            n_samples=self.n_samples * factor,
            sample_interval=self.sample_interval / factor,
            samples_per_bit=self.samples_per_bit * factor,
            center_wavelength=center_wavelength or self.center_wavelength,
        )


def make_grid(n_samples: int, bit_rate: float, samples_per_bit: int, center_wavelength: float) -> SignalGrid:
    """
    Build the sampling lattice for `n_samples / samples_per_bit` bits at `bit_rate`.

    Raises:
        GridError: n_samples not a power of two, samples_per_bit < 4 or not dividing n_samples
        ParameterError: non-positive bit rate
    """
    if bit_rate <= 0:
        raise ParameterError(f"bit_rate must be positive, got {bit_rate}")
    if samples_per_bit < MIN_SAMPLES_PER_BIT:
        raise GridError(f"samples_per_bit must be >= {MIN_SAMPLES_PER_BIT}, got {samples_per_bit}")
    if not is_power_of_two(n_samples):
        raise GridError(f"n_samples must be a power of two, got {n_samples}")
    return SignalGrid(
        n_samples=n_samples,
        sample_interval=1.0 / (bit_rate * samples_per_bit),
        center_wavelength=center_wavelength,
        samples_per_bit=samples_per_bit,
        bit_rate=bit_rate,
    )


@dataclass(frozen=True, eq=False)
class OpticalField:
    """Complex baseband envelope in sqrt(W), referenced to `center_frequency`."""

    samples: np.ndarray
    grid: SignalGrid
    center_frequency: float

    def __post_init__(self):
        samples = np.array(self.samples, dtype=np.complex128)
        if samples.shape != (self.grid.n_samples,):
            raise GridError(f"field has {samples.size} samples, grid expects {self.grid.n_samples}")
        if not np.all(np.isfinite(samples)):
            raise PhysicsError("optical field contains non-finite samples")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)

    @property
    def power(self) -> np.ndarray:
        """Instantaneous power |A|^2 in W."""
        return np.abs(self.samples) ** 2

    @property
    def mean_power(self) -> float:
        return float(np.mean(self.power))

    @property
    def energy(self) -> float:
        return float(np.sum(self.power) * self.grid.sample_interval)

    @property
    def wavelength(self) -> float:
        return frequency_to_wavelength(self.center_frequency)

    def with_samples(self, samples: np.ndarray) -> "OpticalField":
        return OpticalField(samples=samples, grid=self.grid, center_frequency=self.center_frequency)


@dataclass(frozen=True)
class RngStream:
    """
    Reproducible random stream keyed by a master seed and a context tuple.

    The context is hashed into a SeedSequence spawn key, so the draw for a given
    (scenario, sweep point, channel, span, purpose) never depends on execution order.
    """

    master_seed: int
    scenario: str = ""
    sweep_index: int = 0
    channel: int = -1
    span: int = -1
    purpose: str = ""

    @property
    def context(self) -> tuple:
        return (self.scenario, self.sweep_index, self.channel, self.span, self.purpose)

    def derive(self, **changes) -> "RngStream":
        return dataclasses.replace(self, **changes)

    def _spawn_key(self) -> tuple[int, ...]:
        digest = hashlib.sha256(repr(self.context).encode("utf-8")).digest()
        return tuple(int.from_bytes(digest[i:i + 4], "little") for i in range(0, 16, 4))

    def generator(self) -> np.random.Generator:
        seed = np.random.SeedSequence(
            entropy=self.master_seed & 0xFFFFFFFFFFFFFFFF, spawn_key=self._spawn_key()
        )
        return np.random.default_rng(seed)


def wavelength_to_frequency(wavelength: float) -> float:
    if wavelength <= 0:
        raise ParameterError(f"wavelength must be positive, got {wavelength}")
    return SPEED_OF_LIGHT / wavelength


def frequency_to_wavelength(frequency: float) -> float:
    if frequency <= 0:
        raise ParameterError(f"frequency must be positive, got {frequency}")
    return SPEED_OF_LIGHT / frequency


def wavelength_spacing_to_frequency(spacing: float, wavelength: float) -> float:
    """Frequency spacing c*dl/l^2 of a wavelength spacing around `wavelength`."""
    if wavelength <= 0:
        raise ParameterError(f"wavelength must be positive, got {wavelength}")
    return SPEED_OF_LIGHT * spacing / wavelength**2


def dispersion_D_to_beta2(dispersion: float, wavelength: float) -> float:
    """
    Convert D in ps/(nm km) to beta2 in ps^2/km at `wavelength` (m).

    beta2 = -D l^2 / (2 pi c)
    """
    if wavelength <= 0:
        raise ParameterError(f"wavelength must be positive, got {wavelength}")
    return -dispersion * PS_PER_NM_KM * wavelength**2 / (2.0 * np.pi * SPEED_OF_LIGHT) / PS2_PER_KM


def beta2_si(dispersion: float, wavelength: float) -> float:
    """beta2 in s^2/m for D in ps/(nm km)."""
    return dispersion_D_to_beta2(dispersion, wavelength) * PS2_PER_KM


def beta3_si(dispersion: float, slope: float, wavelength: float) -> float:
    """beta3 in s^3/m from D in ps/(nm km) and slope in ps/(nm^2 km)."""
    d_si = dispersion * PS_PER_NM_KM
    s_si = slope * PS_PER_NM2_KM
    w = wavelength
    c = SPEED_OF_LIGHT
    return (w**2 / (2.0 * np.pi * c)) ** 2 * s_si + w**3 * d_si / (2.0 * np.pi**2 * c**2)


def accumulated_beta2(cumulative_dispersion: float, wavelength: float) -> float:
    """beta2*L in s^2 equivalent to a cumulative dispersion in ps/nm."""
    if wavelength <= 0:
        raise ParameterError(f"wavelength must be positive, got {wavelength}")
    return -cumulative_dispersion * PS_PER_NM * wavelength**2 / (2.0 * np.pi * SPEED_OF_LIGHT)


def power_dbm_to_watts(power_dbm: float) -> float:
    return 1e-3 * 10.0 ** (power_dbm / 10.0)


def watts_to_dbm(power_w: float) -> float:
    """Inverse of power_dbm_to_watts; a zero power reads as -inf."""
    if power_w < 0:
        raise ParameterError(f"power must be non-negative, got {power_w}")
    if power_w == 0:
        return -math.inf
    return 10.0 * math.log10(power_w / 1e-3)


def db_to_linear(value_db: float) -> float:
    return 10.0 ** (value_db / 10.0)
