"""Signal builders shared by the test modules."""

import math

import numpy as np

from core_simulation.scenario import validate_config
from core_simulation.signal_core import OpticalField


def gaussian_pulse(grid, t0, peak_power=1e-3):
    """Unchirped Gaussian envelope exp(-t^2 / 2 t0^2) centred in the window."""
    t = grid.time_axis() - grid.time_window / 2.0
    samples = math.sqrt(peak_power) * np.exp(-(t**2) / (2.0 * t0**2))
    return OpticalField(samples=samples, grid=grid, center_frequency=grid.center_frequency)


def cw_field(grid, power_w, offset_bins=0):
    """Constant-power tone `offset_bins` FFT bins away from the grid centre."""
    t = grid.time_axis()
    tone = np.exp(2j * np.pi * offset_bins * grid.frequency_bin * t)
    return OpticalField(samples=math.sqrt(power_w) * tone, grid=grid, center_frequency=grid.center_frequency)


def rms_width(field):
    t = field.grid.time_axis()
    weights = field.power / field.power.sum()
    mean = np.sum(weights * t)
    return math.sqrt(np.sum(weights * (t - mean) ** 2))


def relative_rms(a, b):
    a = np.asarray(a)
    b = np.asarray(b)
    return float(np.sqrt(np.mean(np.abs(a - b) ** 2) / np.mean(np.abs(b) ** 2)))


def small_scenario(**changes):
    """Short single-channel back-to-back scenario, top-level sections shallow-merged with `changes`."""
    tree = {
        "name": "unit",
        "grid": {"n_bits": 256, "samples_per_bit": 16},
        "channel_plan": {"n_channels": 1, "first_wavelength_nm": 1550.0},
        "loops": 0,
    }
    for key, value in changes.items():
        if isinstance(value, dict) and isinstance(tree.get(key), dict):
            tree[key] = {**tree[key], **value}
        else:
            tree[key] = value
    return validate_config(tree)
