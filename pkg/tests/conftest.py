import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from radloc import _backend
from radloc.geometry import SensorArray
from radloc.model import SourceParams

settings.register_profile(
    "default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.register_profile("thorough", max_examples=500, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

# reference geometry, intensity and attenuation of the two simulation setups
INTENSITY = 5e7
ATTENUATION = 0.0068
SENSORS_2D = [[0.0, 0.0], [200.0, 0.0], [50.0, 200.0]]
SOURCE_2D = [120.0, 40.0]
SENSORS_3D = [[0.0, 0.0, 0.0], [200.0, 0.0, 0.0], [0.0, 200.0, 0.0], [0.0, 0.0, 100.0]]
SOURCE_3D = [10.0, 20.0, 10.0]

BACKENDS = ["python"] + (["cython"] if _backend.compiled is not None else [])

# lines reported by the acceptance suite, printed in the terminal summary
ACCEPTANCE_LINES = []


@pytest.fixture
def array2():
    return SensorArray(SENSORS_2D)


@pytest.fixture
def source2():
    return SourceParams(SOURCE_2D, INTENSITY, ATTENUATION)


@pytest.fixture
def array3():
    return SensorArray(SENSORS_3D)


@pytest.fixture
def source3():
    return SourceParams(SOURCE_3D, INTENSITY, ATTENUATION)


@pytest.fixture
def array1():
    return SensorArray([0.0, 1.0])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(params=BACKENDS)
def backend(request):
    return request.param


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
