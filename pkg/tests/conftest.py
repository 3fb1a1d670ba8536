import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from photonchip import data
from photonchip.device import ChipSpec

settings.register_profile(
    "default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


def random_complex(rng, shape):
    return rng.normal(size=shape) + 1j * rng.normal(size=shape)


def random_symmetric(rng, n, scale=1.0):
    A = random_complex(rng, (n, n)) * scale
    return (A + A.T) / 2


def random_unitary(rng, n):
    Z = random_complex(rng, (n, n))
    Q, R = np.linalg.qr(Z)
    return Q * (np.diag(R) / np.abs(np.diag(R)))


@pytest.fixture
def rng():
    return np.random.default_rng(20220301)


@pytest.fixture(scope="session")
def default_chip():
    return ChipSpec.default()


@pytest.fixture(scope="session")
def U1():
    return data.unitary("U1")


def pytest_terminal_summary(terminalreporter):
    import sys

    lines = getattr(sys.modules.get("test_acceptance"), "REPORT_LINES", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
