import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from qtldp.chain import DriftModel
from qtldp.hqt import HqtBlocks
from qtldp.matcore import spectral_radius

settings.register_profile(
    "qtldp",
    max_examples=25,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
    derandomize=True,
)
settings.load_profile("qtldp")


def random_drift(rng, d, radius=None):
    s = rng.standard_normal((d, d))
    if radius is None:
        radius = rng.uniform(0.1, 0.8)
    return s * radius / max(spectral_radius(s), 1e-12)


def random_spd(rng, d, floor=0.3):
    a = rng.standard_normal((d, d))
    return a @ a.T / d + floor * np.eye(d)


def random_model(rng, d, stationary):
    s = random_drift(rng, d)
    return DriftModel(s, None if stationary else random_spd(rng, d))


def random_blocks(rng, d, complex_e=True, margin=0.5):
    """PD HQT blocks: diagonal blocks dominate twice the off-diagonal norm."""
    e = rng.standard_normal((d, d))
    if complex_e:
        e = e + 1j * rng.standard_normal((d, d))
    e *= rng.uniform(0.2, 1.0) / np.linalg.norm(e, 2)
    shift = (2.0 * np.linalg.norm(e, 2) + margin) * np.eye(d)
    return HqtBlocks(
        random_spd(rng, d, 0.0) + shift,
        random_spd(rng, d, 0.0) + shift,
        random_spd(rng, d, 0.0) + shift,
        e,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def pytest_terminal_summary(terminalreporter):
    import sys

    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)
