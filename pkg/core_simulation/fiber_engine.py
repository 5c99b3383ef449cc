"""
Fiber engine: symmetric split-step propagation through fibers, lumped DCMs and EDFAs,
and the SMF -> DCF -> EDFA span that the link repeats.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Literal, Sequence, Union

import numpy as np
import structlog
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy import fft, optimize

from core_simulation.errors import GridError, ParameterError, PhysicsError
from core_simulation.signal_core import (
    GUARD_FACTOR,
    PLANCK,
    OpticalField,
    RngStream,
    beta2_si,
    beta3_si,
    db_to_linear,
    power_dbm_to_watts,
)
from core_simulation.transmitter import apply_dcm

logger = structlog.get_logger(__name__)

QUANTUM_LIMIT_NF_DB = 3.0
# share of field energy allowed outside the guarded band before propagation refuses
BAND_EDGE_ENERGY_LIMIT = 0.05


class FiberSpec(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    length_km: float = Field(..., gt=0)
    attenuation_db_per_km: float = Field(0.2, ge=0)
    dispersion_ps_nm_km: float = 18.0
    slope_ps_nm2_km: float = 0.0
    reference_wavelength_nm: float = Field(1550.0, gt=0)
    gamma_per_w_km: float = Field(1.3, ge=0)
    label: str = "SMF"

    @property
    def length(self) -> float:
        return self.length_km * 1e3

    @property
    def alpha(self) -> float:
        """Power attenuation in 1/m."""
        return self.attenuation_db_per_km * math.log(10.0) / 10.0 / 1e3

    @property
    def gamma(self) -> float:
        """Kerr coefficient in 1/(W m)."""
        return self.gamma_per_w_km / 1e3

    @property
    def loss_db(self) -> float:
        return self.attenuation_db_per_km * self.length_km

    def dispersion_at(self, wavelength_nm: float | None = None) -> float:
        """D in ps/(nm km) at `wavelength_nm`, following the configured slope."""
        if wavelength_nm is None:
            return self.dispersion_ps_nm_km
        return self.dispersion_ps_nm_km + self.slope_ps_nm2_km * (wavelength_nm - self.reference_wavelength_nm)

    def cumulative_dispersion(self, wavelength_nm: float | None = None) -> float:
        """D L in ps/nm."""
        return self.dispersion_at(wavelength_nm) * self.length_km


class AmplifierSpec(BaseModel):
    """
    Lumped EDFA. A null noise figure is a noiseless amplifier; figures below the 3 dB
    quantum limit need `idealized: true`.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    gain_db: float = Field(16.0, ge=0)
    noise_figure_db: float | None = 5.0
    saturation_power_dbm: float | None = None
    idealized: bool = False
    label: str = "EDFA"

    @model_validator(mode="after")
    def _quantum_limit(self):
        if not math.isfinite(self.gain_db):
            raise ValueError("gain_db must be finite")
        nf = self.noise_figure_db
        if nf is not None and nf < QUANTUM_LIMIT_NF_DB and not self.idealized:
            raise ValueError(
                f"noise_figure_db={nf} is below the {QUANTUM_LIMIT_NF_DB} dB quantum limit; set idealized: true"
            )
        return self

    @property
    def gain(self) -> float:
        return db_to_linear(self.gain_db)

    @property
    def n_sp(self) -> float:
        if self.noise_figure_db is None:
            return 0.0
        return db_to_linear(self.noise_figure_db) / 2.0

    def effective_gain(self, input_power: float) -> float:
        """Linear gain at `input_power` W; compressed when a saturation power is set."""
        g0 = self.gain
        if self.saturation_power_dbm is None or input_power <= 0 or g0 == 1.0:
            return g0
        p_sat = power_dbm_to_watts(self.saturation_power_dbm)

        def balance(g):
            return g - g0 * math.exp(-(g - 1.0) * input_power / p_sat)

        return optimize.brentq(balance, 1.0, g0)


class DcmSpec(BaseModel):
    """Lumped dispersion-compensation module (all-pass)."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    dispersion_ps_nm: float
    label: str = "DCM"


class StepControl(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    mode: Literal["fixed", "adaptive"] = "fixed"
    fixed_step_km: float = Field(0.1, gt=0)
    max_nonlinear_phase: float = Field(0.005, gt=0, le=0.1)


LinkElement = Union[FiberSpec, AmplifierSpec, DcmSpec]


@dataclass(frozen=True)
class Span:
    elements: tuple[FiberSpec, FiberSpec, AmplifierSpec]

    @property
    def length_km(self) -> float:
        return sum(e.length_km for e in self.elements if isinstance(e, FiberSpec))

    @property
    def residual_dispersion(self) -> float:
        """Per-span D L sum in ps/nm at the fibers' reference wavelength."""
        return sum(e.cumulative_dispersion() for e in self.elements if isinstance(e, FiberSpec))


def build_span(smf: FiberSpec, dcf: FiberSpec, amp: AmplifierSpec) -> Span:
    return Span(elements=(smf, dcf, amp))


def link_elements(spans: Sequence[Span]) -> list[LinkElement]:
    return [element for span in spans for element in span.elements]


def _check_band(field: OpticalField) -> None:
    """Refuse fields whose spectrum reaches into the outer guard band."""
    spectrum = np.abs(fft.fft(field.samples)) ** 2
    total = spectrum.sum()
    if total == 0:
        return
    freqs = np.abs(field.grid.frequency_axis())
    edge = freqs > field.grid.sample_rate / (2.0 * GUARD_FACTOR)
    share = spectrum[edge].sum() / total
    if share > BAND_EDGE_ENERGY_LIMIT:
        raise GridError(
            f"{share:.1%} of the field energy lies in the outer guard band; raise samples_per_bit"
        )


def _linear_operator(field: OpticalField, fiber: FiberSpec) -> np.ndarray:
    """Per-metre exponent of the dispersion and loss step in the FFT domain."""
    wavelength_nm = field.wavelength * 1e9
    dispersion = fiber.dispersion_at(wavelength_nm)
    beta2 = beta2_si(dispersion, field.wavelength)
    beta3 = beta3_si(dispersion, fiber.slope_ps_nm2_km, field.wavelength) if fiber.slope_ps_nm2_km else 0.0
    omega = field.grid.angular_frequency()
    return 1j * (beta2 / 2.0) * omega**2 - 1j * (beta3 / 6.0) * omega**3 - fiber.alpha / 2.0


def _nonlinear_step(samples: np.ndarray, gamma: float, dz: float) -> np.ndarray:
    return samples * np.exp(1j * gamma * np.abs(samples) ** 2 * dz)


def propagate_fiber(field: OpticalField, fiber: FiberSpec, ctl: StepControl | None = None) -> OpticalField:
    """
    Symmetric split-step integration of the scalar NLSE over `fiber`.

    With gamma = 0 the whole fiber is one exact linear step.

    Raises:
        GridError: field spectrum reaches into the guard band
        PhysicsError: samples overflow to non-finite values
    """
    ctl = ctl or StepControl()
    _check_band(field)
    operator = _linear_operator(field, fiber)
    length = fiber.length
    gamma = fiber.gamma
    a = field.samples

    if gamma == 0:
        a = fft.ifft(fft.fft(a) * np.exp(operator * length))
        n_steps = 1
    elif ctl.mode == "fixed":
        n_steps = max(1, math.ceil(length / (ctl.fixed_step_km * 1e3) - 1e-9))
        dz = length / n_steps
        half = np.exp(operator * dz / 2.0)
        full = half * half
        a = fft.ifft(fft.fft(a) * half)
        for i in range(n_steps):
            a = _nonlinear_step(a, gamma, dz)
            a = fft.ifft(fft.fft(a) * (full if i < n_steps - 1 else half))
    else:
        n_steps = 0
        remaining = length
        while remaining > 0:
            peak = float(np.max(np.abs(a) ** 2))
            dz = remaining if peak == 0 else min(ctl.max_nonlinear_phase / (gamma * peak), remaining)
            if remaining - dz < 1e-6:
                dz = remaining
            half = np.exp(operator * dz / 2.0)
            a = fft.ifft(fft.fft(a) * half)
            a = _nonlinear_step(a, gamma, dz)
            a = fft.ifft(fft.fft(a) * half)
            remaining -= dz
            n_steps += 1

    if not np.all(np.isfinite(a)):
        raise PhysicsError(f"{fiber.label}: field overflowed during propagation")
    logger.debug("fiber_done", label=fiber.label, length_km=fiber.length_km, steps=n_steps)
    return field.with_samples(a)


def ase_density(amp: AmplifierSpec, gain: float, frequency: float) -> float:
    """Single-polarisation ASE spectral density n_sp (G - 1) h nu in W/Hz."""
    return amp.n_sp * (gain - 1.0) * PLANCK * frequency


def amplify(field: OpticalField, amp: AmplifierSpec, rng: RngStream) -> OpticalField:
    """Scale by sqrt(G) and add circular complex Gaussian ASE over the simulated band."""
    gain = amp.effective_gain(field.mean_power)
    if not math.isfinite(gain):
        raise ParameterError(f"{amp.label}: gain must be finite")
    samples = field.samples * math.sqrt(gain)

    density = ase_density(amp, gain, field.center_frequency)
    if density > 0:
        sigma = math.sqrt(density * field.grid.sample_rate / 2.0)
        generator = rng.generator()
        n = field.grid.n_samples
        samples = samples + sigma * (generator.standard_normal(n) + 1j * generator.standard_normal(n))
    return field.with_samples(samples)


ElementMonitor = Callable[[float, OpticalField, str], None]


def propagate_link(
    field: OpticalField,
    elements: Sequence[LinkElement],
    ctl: StepControl,
    rng: RngStream,
    monitor: ElementMonitor | None = None,
) -> OpticalField:
    """
    Run `field` through the element sequence in order.

    Amplifier noise draws from `rng` derived per amplifier index, and `monitor` is called
    with (distance_km, field, label) after every element.
    """
    distance = 0.0
    amp_index = 0
    for element in elements:
        if isinstance(element, FiberSpec):
            field = propagate_fiber(field, element, ctl)
            distance += element.length_km
        elif isinstance(element, AmplifierSpec):
            field = amplify(field, element, rng.derive(span=amp_index, purpose="ase"))
            amp_index += 1
            logger.info("span_done", span=amp_index, distance_km=round(distance, 6), power_w=field.mean_power)
        elif isinstance(element, DcmSpec):
            field = apply_dcm(field, element.dispersion_ps_nm)
        else:
            raise ParameterError(f"unknown link element {element!r}")
        if monitor is not None:
            monitor(distance, field, element.label)
    return field
