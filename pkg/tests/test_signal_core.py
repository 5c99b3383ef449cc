import math

import numpy as np
import pytest

from core_simulation.errors import GridError, ParameterError, PhysicsError
from core_simulation.signal_core import (
    OpticalField,
    RngStream,
    accumulated_beta2,
    beta2_si,
    dispersion_D_to_beta2,
    frequency_to_wavelength,
    make_grid,
    power_dbm_to_watts,
    watts_to_dbm,
    wavelength_spacing_to_frequency,
    wavelength_to_frequency,
)


def test_make_grid_lays_out_bits():
    grid = make_grid(16384, 40e9, 16, 1550e-9)
    assert grid.sample_interval == pytest.approx(1.5625e-12)
    assert grid.time_window == pytest.approx(25.6e-9)
    assert grid.n_bits == 1024
    assert grid.sample_rate == pytest.approx(640e9)
    assert grid.frequency_bin == pytest.approx(1 / 25.6e-9)


def test_make_grid_accepts_single_bit():
    grid = make_grid(64, 40e9, 64, 1550e-9)
    assert grid.n_bits == 1


@pytest.mark.parametrize(
    "n_samples, samples_per_bit",
    [(1000, 8), (8192, 6), (8192, 2), (32, 4)],
)
def test_make_grid_rejects_bad_lattices(n_samples, samples_per_bit):
    with pytest.raises(GridError):
        make_grid(n_samples, 40e9, samples_per_bit, 1550e-9)


def test_make_grid_rejects_non_positive_bit_rate():
    with pytest.raises(ParameterError):
        make_grid(8192, 0.0, 16, 1550e-9)


def test_frequency_axis_is_fft_ordered(grid):
    freqs = grid.frequency_axis()
    assert freqs[0] == 0
    assert freqs[1] == pytest.approx(grid.frequency_bin)
    assert freqs[grid.n_samples // 2] == pytest.approx(-grid.sample_rate / 2)


def test_upsampled_keeps_time_window(grid):
    wide = grid.upsampled(4, center_wavelength=1549e-9)
    assert wide.n_samples == 4 * grid.n_samples
    assert wide.time_window == pytest.approx(grid.time_window)
    assert wide.samples_per_bit == 64
    assert wide.center_wavelength == 1549e-9
    with pytest.raises(GridError):
        grid.upsampled(3)


def test_wavelength_frequency_conversions():
    assert wavelength_to_frequency(1550e-9) == pytest.approx(193.414e12, rel=1e-5)
    assert wavelength_to_frequency(1543.6e-9) == pytest.approx(194.217e12, rel=1e-5)
    assert frequency_to_wavelength(wavelength_to_frequency(1556e-9)) == pytest.approx(1556e-9, rel=1e-12)
    with pytest.raises(ParameterError):
        wavelength_to_frequency(0.0)


def test_channel_spacing_is_about_fifty_ghz():
    assert wavelength_spacing_to_frequency(0.4e-9, 1550e-9) == pytest.approx(49.95e9, abs=0.1e9)


@pytest.mark.parametrize("dispersion, beta2", [(18.0, -22.96), (-38.0, 48.47), (0.0, 0.0)])
def test_dispersion_to_beta2(dispersion, beta2):
    assert dispersion_D_to_beta2(dispersion, 1550e-9) == pytest.approx(beta2, abs=0.01)


def test_dispersion_to_beta2_is_linear():
    one = dispersion_D_to_beta2(1.0, 1550e-9)
    assert dispersion_D_to_beta2(17.0, 1550e-9) == pytest.approx(17.0 * one, rel=1e-12)
    assert dispersion_D_to_beta2(5.0, 1550e-9) + dispersion_D_to_beta2(-5.0, 1550e-9) == pytest.approx(0.0, abs=1e-15)


def test_accumulated_beta2_matches_per_km_conversion():
    # 702 ps/nm is 39 km of 18 ps/(nm km)
    assert accumulated_beta2(702.0, 1550e-9) == pytest.approx(beta2_si(18.0, 1550e-9) * 39e3, rel=1e-12)


@pytest.mark.parametrize("dbm, watts", [(0.0, 1e-3), (-30.0, 1e-6), (-12.0, 63.1e-6)])
def test_dbm_to_watts(dbm, watts):
    assert power_dbm_to_watts(dbm) == pytest.approx(watts, rel=1e-3)


def test_dbm_round_trip():
    for dbm in np.linspace(-60.0, 30.0, 19):
        assert watts_to_dbm(power_dbm_to_watts(dbm)) == pytest.approx(dbm, abs=1e-12)


def test_zero_power_is_minus_infinity():
    assert watts_to_dbm(0.0) == -math.inf
    with pytest.raises(ParameterError):
        watts_to_dbm(-1e-3)


def test_optical_field_is_immutable_and_checked(grid):
    field = OpticalField(samples=np.ones(grid.n_samples), grid=grid, center_frequency=grid.center_frequency)
    assert not field.samples.flags.writeable
    assert field.mean_power == pytest.approx(1.0)
    assert field.wavelength == pytest.approx(1550e-9)

    with pytest.raises(GridError):
        OpticalField(samples=np.ones(10), grid=grid, center_frequency=grid.center_frequency)
    bad = np.ones(grid.n_samples, dtype=complex)
    bad[3] = np.nan
    with pytest.raises(PhysicsError):
        OpticalField(samples=bad, grid=grid, center_frequency=grid.center_frequency)


def test_optical_field_copies_its_input(grid):
    source = np.ones(grid.n_samples, dtype=complex)
    field = OpticalField(samples=source, grid=grid, center_frequency=grid.center_frequency)
    source[:] = 0
    assert field.mean_power == pytest.approx(1.0)


def test_rng_stream_is_keyed_by_context():
    stream = RngStream(master_seed=7, scenario="desk", channel=2, purpose="receiver")
    first = stream.generator().standard_normal(16)
    again = RngStream(master_seed=7, scenario="desk", channel=2, purpose="receiver").generator().standard_normal(16)
    other_channel = stream.derive(channel=3).generator().standard_normal(16)
    other_seed = stream.derive(master_seed=8).generator().standard_normal(16)

    np.testing.assert_array_equal(first, again)
    assert not np.array_equal(first, other_channel)
    assert not np.array_equal(first, other_seed)
