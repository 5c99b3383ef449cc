import math

import numpy as np
import pytest
from scipy import signal

from core_simulation.errors import AlignmentError, ParameterError
from core_simulation.metrics import q_and_ber
from core_simulation.receiver import (
    ElectricalWaveform,
    ReceiverSpec,
    decide,
    electrical_filter,
    electrical_response,
    optimal_threshold,
    photodetect,
    q_value,
)
from core_simulation.signal_core import ELECTRON_CHARGE, RngStream, make_grid
from core_simulation.transmitter import BitSequence, TransmitterSpec, transmit
from helpers import cw_field

SHOT_ONLY = ReceiverSpec(thermal_noise_pa_rthz=0.0, dark_current_na=0.0, shot_noise=True)


@pytest.fixture
def long_grid():
    return make_grid(131072, 40e9, 16, 1550e-9)


def clean_wave(grid, noiseless_receiver, bits=None):
    field, bits = transmit(TransmitterSpec(prbs_seed=9), grid, grid.n_bits, bits)
    return photodetect(field, noiseless_receiver, RngStream(1)), bits


def test_noiseless_square_law(grid, noiseless_receiver):
    wave = photodetect(cw_field(grid, 1e-3), noiseless_receiver, RngStream(1))
    np.testing.assert_allclose(wave.samples, 1e-3, rtol=1e-12)
    half = photodetect(cw_field(grid, 0.5e-3), noiseless_receiver, RngStream(1))
    np.testing.assert_allclose(half.samples, 0.5e-3, rtol=1e-12)


def test_detection_ignores_optical_phase(grid, noiseless_receiver):
    field, _ = transmit(TransmitterSpec(), grid, grid.n_bits)
    rotated = field.with_samples(field.samples * np.exp(1j * 0.7))
    np.testing.assert_allclose(
        photodetect(rotated, noiseless_receiver, RngStream(1)).samples,
        photodetect(field, noiseless_receiver, RngStream(1)).samples,
        rtol=1e-12,
    )


def test_dark_current_offsets_the_current(grid):
    spec = ReceiverSpec(shot_noise=False, thermal_noise_pa_rthz=0.0, dark_current_na=10.0)
    wave = photodetect(cw_field(grid, 1e-3), spec, RngStream(1))
    np.testing.assert_allclose(wave.samples, 1e-3 + 10e-9, rtol=1e-12)


def test_shot_noise_variance(long_grid):
    power = 1e-3
    wave = photodetect(cw_field(long_grid, power), SHOT_ONLY, RngStream(4, purpose="receiver"))
    expected = 2 * ELECTRON_CHARGE * power * SHOT_ONLY.bandwidth_hz(40e9)
    assert np.var(wave.samples) == pytest.approx(expected, rel=0.05)


def test_shot_noise_variance_scales_with_power(long_grid):
    powers = np.array([0.1e-3, 0.3e-3, 1e-3])
    variances = [
        np.var(photodetect(cw_field(long_grid, p), SHOT_ONLY, RngStream(4)).samples) for p in powers
    ]
    slope = np.polyfit(powers, variances, 1)[0]
    assert slope == pytest.approx(2 * ELECTRON_CHARGE * 30e9, rel=0.05)


def test_thermal_noise_variance(long_grid):
    spec = ReceiverSpec(shot_noise=False, dark_current_na=0.0, thermal_noise_pa_rthz=10.0)
    wave = photodetect(cw_field(long_grid, 1e-3), spec, RngStream(2))
    assert np.var(wave.samples) == pytest.approx((10e-12) ** 2 * 30e9, rel=0.05)


def test_default_bandwidth_is_three_quarters_of_bit_rate():
    assert ReceiverSpec().bandwidth_hz(40e9) == pytest.approx(30e9)
    assert ReceiverSpec(electrical_bandwidth_ghz=28).bandwidth_hz(40e9) == pytest.approx(28e9)


@pytest.mark.parametrize("kind", ["bessel", "gaussian"])
def test_filter_passes_dc(grid, kind):
    spec = ReceiverSpec(electrical_filter=kind)
    wave = ElectricalWaveform(samples=np.full(grid.n_samples, 2e-4), grid=grid)
    np.testing.assert_allclose(electrical_filter(wave, spec).samples, 2e-4, rtol=1e-12)


def test_gaussian_filter_is_three_db_down_at_bandwidth(grid):
    spec = ReceiverSpec(electrical_filter="gaussian", electrical_bandwidth_ghz=20)
    response = electrical_response(spec, grid)
    index = int(round(20e9 / grid.frequency_bin))
    assert abs(response[index]) ** 2 == pytest.approx(0.5, rel=1e-9)


def test_bessel_attenuates_a_tone_at_three_times_bandwidth(grid):
    spec = ReceiverSpec()
    frequency = 90e9
    tone = np.cos(2 * np.pi * frequency * grid.time_axis())
    out = electrical_filter(ElectricalWaveform(samples=tone, grid=grid), spec)

    b, a = signal.bessel(4, 2 * np.pi * 30e9, analog=True, norm="mag")
    _, h = signal.freqs(b, a, worN=[2 * np.pi * frequency])
    measured_db = 20 * math.log10(np.max(np.abs(out.samples)))
    assert measured_db == pytest.approx(20 * math.log10(abs(h[0])), abs=0.5)
    assert measured_db < -10


def test_filtered_white_noise_variance(long_grid):
    spec = ReceiverSpec()
    noise = np.random.default_rng(8).standard_normal(long_grid.n_samples)
    out = electrical_filter(ElectricalWaveform(samples=noise, grid=long_grid), spec)
    predicted = np.mean(np.abs(electrical_response(spec, long_grid)) ** 2) * np.var(noise)
    assert np.var(out.samples) == pytest.approx(predicted, rel=0.05)


def test_bandwidth_at_nyquist_is_rejected(grid):
    with pytest.raises(ParameterError):
        electrical_response(ReceiverSpec(electrical_bandwidth_ghz=400), grid)


def test_clean_signal_decides_without_errors_mid_bit(grid, noiseless_receiver):
    wave, bits = clean_wave(grid, noiseless_receiver)
    spb = grid.samples_per_bit
    for phase in range(spb // 4, 3 * spb // 4):
        decision = decide(wave, bits, spb, phase=phase)
        assert decision.n_errors == 0
        assert decision.bit_offset == 0
    assert decide(wave, bits, spb).correlation == pytest.approx(1.0)


def test_single_flipped_bit_is_one_error(grid, noiseless_receiver):
    _, bits = transmit(TransmitterSpec(prbs_seed=9), grid, grid.n_bits)
    flipped = bits.bits.copy()
    flipped[100] ^= 1
    wave, _ = clean_wave(grid, noiseless_receiver, BitSequence(flipped))
    decision = decide(wave, bits, grid.samples_per_bit, phase=8)
    assert decision.n_errors == 1


def test_delayed_waveform_is_realigned(grid, noiseless_receiver):
    wave, bits = clean_wave(grid, noiseless_receiver)
    delayed = ElectricalWaveform(samples=np.roll(wave.samples, 5 * grid.samples_per_bit), grid=grid)
    decision = decide(delayed, bits, grid.samples_per_bit)
    assert decision.bit_offset == 5
    assert decision.n_errors == 0


def test_unrelated_waveform_fails_alignment(grid):
    rng = np.random.default_rng(12)
    wave = ElectricalWaveform(samples=rng.standard_normal(grid.n_samples), grid=grid)
    bits = BitSequence(rng.integers(0, 2, grid.n_bits))
    with pytest.raises(AlignmentError):
        decide(wave, bits, grid.samples_per_bit)


def test_decide_rejects_bad_phase(grid, noiseless_receiver):
    wave, bits = clean_wave(grid, noiseless_receiver)
    with pytest.raises(ParameterError):
        decide(wave, bits, grid.samples_per_bit, phase=grid.samples_per_bit)


def test_q_six_estimates_ber_near_1e9():
    grid = make_grid(32768, 40e9, 4, 1550e-9)
    rng = np.random.default_rng(21)
    bits = BitSequence(rng.integers(0, 2, grid.n_bits))
    levels = bits.bits + rng.standard_normal(grid.n_bits) / 12.0
    wave = ElectricalWaveform(samples=np.repeat(levels, 4), grid=grid)

    decision = decide(wave, bits, 4)
    result = q_and_ber(wave, bits, decision)
    assert 9.87e-10 / 3 < result.ber_estimated < 9.87e-10 * 3


def test_threshold_and_q_helpers():
    assert optimal_threshold(1.0, 0.0, 0.1, 0.1) == pytest.approx(0.5)
    assert optimal_threshold(1.0, 0.0, 0.3, 0.1) == pytest.approx(0.25)
    assert optimal_threshold(1.0, 0.0, 0.0, 0.0) == pytest.approx(0.5)
    assert q_value(1.0, 0.0, 0.1, 0.1) == pytest.approx(5.0)
    assert q_value(1.0, 0.0, 0.0, 0.0) == math.inf
    assert q_value(0.0, 1.0, 0.1, 0.1) == 0.0
