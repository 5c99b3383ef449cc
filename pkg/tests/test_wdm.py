import math

import numpy as np
import pytest
from pydantic import ValidationError

from core_simulation.errors import ParameterError
from core_simulation.metrics import spectral_peaks, spectrum
from core_simulation.signal_core import SPEED_OF_LIGHT, OpticalField, make_grid, watts_to_dbm
from core_simulation.transmitter import TransmitterSpec, build_channel
from core_simulation.wdm import (
    ChannelPlan,
    FilterSpec,
    aggregate_grid,
    demux,
    filter_bank_centres_hz,
    filter_power_response,
    filter_response,
    mux,
)
from helpers import cw_field, relative_rms

SMOOTH_TX = TransmitterSpec(rise_time_ps=12.0, extinction_ratio_db=10.0)


def channel_grid(plan, n_samples=8192):
    return make_grid(n_samples, 40e9, 16, plan.center_wavelength)


def test_full_channel_plan():
    plan = ChannelPlan()
    assert plan.wavelength_nm(0) == pytest.approx(1543.6)
    assert plan.wavelength_nm(31) == pytest.approx(1556.0)
    assert plan.occupied_bandwidth_nm == pytest.approx(12.4)
    assert plan.spacing_hz == pytest.approx(49.9e9, abs=0.2e9)
    with pytest.raises(ParameterError):
        plan.wavelength_nm(32)


def test_plan_overrides_are_validated():
    with pytest.raises(ValidationError):
        ChannelPlan(n_channels=4, overrides={4: {"laser_power_dbm": -10}})
    with pytest.raises(ValidationError):
        ChannelPlan(n_channels=4, overrides={1: {"laser_wavelength_nm": 1551.0}})


def test_transmitter_for_applies_overrides():
    plan = ChannelPlan(n_channels=4, overrides={2: {"laser_power_dbm": -9.0}})
    base = TransmitterSpec()
    assert plan.transmitter_for(2, base).laser_power_dbm == -9.0
    assert plan.transmitter_for(2, base).laser_wavelength_nm == pytest.approx(1544.4)
    assert plan.transmitter_for(1, base).laser_power_dbm == -12.0


@pytest.mark.parametrize("n_channels, factor", [(1, 1), (8, 1), (32, 4)])
def test_aggregate_grid_covers_the_band(n_channels, factor):
    plan = ChannelPlan(n_channels=n_channels)
    narrow = channel_grid(plan, 1024)
    wide = aggregate_grid(plan, narrow)
    assert wide.n_samples == factor * narrow.n_samples
    assert wide.sample_rate >= 1.25 * n_channels * plan.spacing_hz


def test_single_channel_mux_is_identity(grid):
    plan = ChannelPlan(n_channels=1, first_wavelength_nm=1550.0)
    field = build_channel(TransmitterSpec(), grid, grid.n_bits)
    combined = mux([field], plan, aggregate_grid(plan, grid))
    assert relative_rms(combined.samples, field.samples) < 1e-9


def test_two_cw_channels_add_power_and_sit_one_spacing_apart():
    plan = ChannelPlan(n_channels=2, first_wavelength_nm=1550.0, spacing_nm=0.4)
    grid = channel_grid(plan)
    tone = cw_field(grid, 10 ** (-1.2) * 1e-3)
    combined = mux([tone, tone], plan, aggregate_grid(plan, grid))
    assert watts_to_dbm(combined.mean_power) == pytest.approx(-8.99, abs=0.01)

    peaks = spectral_peaks(spectrum(combined, combined.grid.frequency_bin), count=2)
    assert peaks[1] - peaks[0] == pytest.approx(49.95e9, abs=0.2e9)


def test_disjoint_channels_keep_their_energy():
    plan = ChannelPlan(n_channels=2, first_wavelength_nm=1549.0, spacing_nm=2.0)
    grid = channel_grid(plan)
    fields = [
        build_channel(SMOOTH_TX.model_copy(update={"prbs_seed": seed}), grid, grid.n_bits) for seed in (3, 5)
    ]
    combined = mux(fields, plan, aggregate_grid(plan, grid))
    assert combined.energy == pytest.approx(sum(f.energy for f in fields), rel=1e-3)


def test_filter_shape():
    frequencies = np.array([0.0, 18.7e9, -18.7e9])
    gaussian = FilterSpec(shape="gaussian", fwhm_nm=0.3)
    half = gaussian.bandwidth_hz(1550e-9) / 2
    response = filter_power_response(gaussian, np.array([0.0, half, -half]), 1550e-9)
    np.testing.assert_allclose(response, [1.0, 0.5, 0.5], rtol=1e-12)

    flat = filter_power_response(FilterSpec(shape="super-gaussian", order=4, fwhm_nm=0.3), frequencies, 1550e-9)
    round_ = filter_power_response(gaussian, frequencies, 1550e-9)
    assert flat[1] > round_[1]


def test_gaussian_filter_area():
    spec = FilterSpec(shape="gaussian", fwhm_nm=0.3)
    bandwidth = spec.bandwidth_hz(1550e-9)
    frequencies = np.linspace(-5 * bandwidth, 5 * bandwidth, 200001)
    area = np.sum(filter_power_response(spec, frequencies, 1550e-9)) * (frequencies[1] - frequencies[0])
    assert area == pytest.approx(bandwidth * math.sqrt(math.pi / (4 * math.log(2))), rel=1e-3)


def test_on_centre_tone_passes_unchanged():
    plan = ChannelPlan(n_channels=1, first_wavelength_nm=1550.0)
    grid = channel_grid(plan)
    tone = cw_field(grid, 1e-3)
    out = demux(tone, plan, 0, FilterSpec(shape="gaussian"))
    assert out.mean_power == pytest.approx(1e-3, rel=1e-6)


def test_tone_at_half_bandwidth_loses_three_db():
    plan = ChannelPlan(n_channels=1, first_wavelength_nm=1550.0)
    grid = channel_grid(plan)
    k = 160
    wavelength = grid.center_wavelength
    fwhm_nm = 2 * k * grid.frequency_bin * wavelength**2 / SPEED_OF_LIGHT * 1e9
    tone = cw_field(grid, 1e-3, offset_bins=k)
    out = demux(tone, plan, 0, FilterSpec(shape="gaussian", fwhm_nm=fwhm_nm))
    assert 10 * math.log10(out.mean_power / tone.mean_power) == pytest.approx(-3.0103, abs=1e-4)


def test_wide_filter_round_trip_recovers_the_channel():
    plan = ChannelPlan(n_channels=1, first_wavelength_nm=1550.0)
    grid = channel_grid(plan)
    field = build_channel(SMOOTH_TX.model_copy(update={"laser_wavelength_nm": 1550.0}), grid, grid.n_bits)
    combined = mux([field], plan, aggregate_grid(plan, grid))
    out = demux(combined, plan, 0, FilterSpec(order=4, fwhm_nm=4.0), channel_grid=grid)
    assert relative_rms(out.samples, field.samples) < 1e-3


def test_narrower_filter_leaks_less_from_the_neighbour():
    plan = ChannelPlan(n_channels=2, first_wavelength_nm=1550.0)
    grid = channel_grid(plan)
    silent = OpticalField(samples=np.zeros(grid.n_samples), grid=grid, center_frequency=grid.center_frequency)
    neighbour = build_channel(TransmitterSpec(), grid, grid.n_bits)
    combined = mux([silent, neighbour], plan, aggregate_grid(plan, grid))

    leak_wide = demux(combined, plan, 0, FilterSpec(fwhm_nm=0.3)).mean_power
    leak_narrow = demux(combined, plan, 0, FilterSpec(fwhm_nm=0.2)).mean_power
    assert leak_wide > leak_narrow > 0


def test_demux_output_lives_on_the_channel_grid():
    plan = ChannelPlan(n_channels=32)
    grid = channel_grid(plan, 1024)
    wide = aggregate_grid(plan, grid)
    silent = OpticalField(samples=np.zeros(wide.n_samples), grid=wide, center_frequency=wide.center_frequency)
    out = demux(silent, plan, 5, FilterSpec(), channel_grid=grid)
    assert out.grid is grid
    assert abs(out.center_frequency - plan.frequency(5)) <= wide.frequency_bin
    with pytest.raises(ParameterError):
        demux(silent, plan, 32, FilterSpec())


def test_filter_bank_sits_on_the_carriers():
    plan = ChannelPlan()
    wide = aggregate_grid(plan, channel_grid(plan, 16384))
    centres = filter_bank_centres_hz(plan, wide)
    carriers = np.array([plan.frequency(i) for i in range(plan.n_channels)])
    assert np.all(np.abs(centres - carriers) <= wide.frequency_bin)

    for centre in centres[[0, 15, 31]]:
        response = filter_response(FilterSpec(center_offset_hz=centre - wide.center_frequency), wide)
        assert response.max() == pytest.approx(1.0, abs=1e-12)


def test_filter_width_follows_its_own_wavelength():
    plan = ChannelPlan()
    wide = aggregate_grid(plan, channel_grid(plan))
    spec = FilterSpec()
    blue = np.sum(np.abs(filter_response(spec, wide, 1543.6e-9)) ** 2)
    red = np.sum(np.abs(filter_response(spec, wide, 1556.0e-9)) ** 2)
    # a fixed width in nm spans more Hz at shorter wavelengths
    assert blue / red == pytest.approx((1556.0 / 1543.6) ** 2, rel=1e-4)


def test_detuned_filter_bank_walks_off_the_carriers():
    plan = ChannelPlan(n_channels=8)
    wide = aggregate_grid(plan, channel_grid(plan, 1024))
    centres = filter_bank_centres_hz(plan, wide, demux_spacing_nm=0.3)
    carriers = np.array([plan.frequency(i) for i in range(plan.n_channels)])
    offsets = np.abs(centres - carriers)
    assert offsets[0] <= wide.frequency_bin
    assert np.all(np.diff(offsets) > 0)
