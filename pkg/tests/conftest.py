import pytest

from core_simulation.receiver import ReceiverSpec
from core_simulation.signal_core import make_grid
from core_simulation.transmitter import TransmitterSpec

BIT_RATE = 40e9
WAVELENGTH = 1550e-9


@pytest.fixture
def grid():
    """512 bits at 16 samples per bit (8192 samples, 640 GHz)."""
    return make_grid(8192, BIT_RATE, 16, WAVELENGTH)


@pytest.fixture
def small_grid():
    return make_grid(2048, BIT_RATE, 16, WAVELENGTH)


@pytest.fixture
def transmitter_spec():
    return TransmitterSpec()


@pytest.fixture
def noiseless_receiver():
    return ReceiverSpec(shot_noise=False, thermal_noise_pa_rthz=0.0, dark_current_na=0.0)
