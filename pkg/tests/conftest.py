import pytest
from hypothesis import settings

from qdcavity.device_model import CavityParams, DeviceConfig, DotParams, LaserPulse, laser_frequency_for_detuning

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")

# Δω_↑ = 5.25 meV; with Δ = 0.5 meV the laser leaves Δω_↓ = 4.75 meV.
BASE_DOT = DotParams(omega_up=1005.25, omega_down=990.25, omega_v=0.0, g_cav=0.5)


@pytest.fixture
def dot():
    return BASE_DOT


@pytest.fixture
def device2():
    return DeviceConfig(CavityParams(1000.0, 0.0658, 2), (BASE_DOT, BASE_DOT), 4.0)


@pytest.fixture
def device4():
    return DeviceConfig(CavityParams(1000.0, 0.0658, 2), (BASE_DOT,) * 4, 4.0)


def y_drive(device, k, delta=0.5, rabi=1.0, envelope=None):
    w = laser_frequency_for_detuning(device.dots[k], device.cavity, delta)
    return LaserPulse(k, "y", w, rabi, envelope)
