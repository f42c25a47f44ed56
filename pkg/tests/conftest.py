import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", deadline=None, max_examples=40,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.register_profile("thorough", deadline=None, max_examples=400)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


def crandn(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def random_hermitian(rng, n):
    a = crandn(rng, n, n)
    return 0.5 * (a + a.conj().T)


def random_pd(rng, n, floor=0.1):
    a = crandn(rng, n, n)
    return a @ a.conj().T + floor * np.eye(n)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def small_scene():
    from maskbf.scene_gen import SceneSpec, synth_scene

    return synth_scene(SceneSpec(n_mics=3, duration=0.25, window_len=64, hop_len=16,
                                 max_delay=4.0, seed=7, snr_db=0.0))


# one line per acceptance criterion, printed after the test summary
CRITERIA_LINES = []


def pytest_terminal_summary(terminalreporter):
    if CRITERIA_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(CRITERIA_LINES):
            terminalreporter.write_line(line)
