import math

import numpy as np
import pytest
from hypothesis import settings

from qubo_unwrap.phase import PhaseGrid, PhaseKind

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")

# verdict lines from the acceptance suite, repeated at the end of the run
ACCEPTANCE_LINES = []


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance: end-to-end acceptance criteria (slow)")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def random_wrapped(rng, height, width):
    """Uniform wrapped phases strictly inside (-pi, pi]."""
    v = rng.uniform(-math.pi, math.pi, size=(height, width))
    v[v <= -math.pi] = math.pi
    return PhaseGrid(v, PhaseKind.WRAPPED)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
