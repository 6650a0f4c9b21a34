import numpy as np
import pytest

from pansharp.synth import random_field

# Filled by test_acceptance; printed once at the end of the session.
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def smooth_image(rng, shape, n_bands=None, max_freq=0.05, offset=100.0, scale=20.0):
    """Band-limited positive test scene."""
    if n_bands is None:
        return offset + scale * random_field(shape, rng, slope=1.0, max_freq=max_freq)
    return np.stack([offset + scale * random_field(shape, rng, slope=1.0, max_freq=max_freq)
                     for _ in range(n_bands)])
