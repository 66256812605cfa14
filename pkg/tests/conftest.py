import numpy as np
import pytest
from hypothesis import settings

from bsdechaos.drivers import DriverSpec, GridSpec, IncrementLaw

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


def random_law(rng, max_atoms=4, allow_zero=True):
    """Centred finite law on distinct atoms."""
    m = int(rng.integers(1 if allow_zero else 2, max_atoms + 1))
    if m == 1:
        return IncrementLaw.zero()
    while True:
        x = rng.normal(size=m)
        p = rng.random(m) + 0.05
        p /= p.sum()
        x = x - p @ x
        if len(np.unique(np.round(x, 9))) == m:
            return IncrementLaw(x, p)


def random_driver(rng, k=None, horizon=1.0):
    """Independent-increment driver with random continuous and jump laws per step."""
    k = int(k or rng.integers(1, 4))
    cl = [random_law(rng, 3) for _ in range(k)]
    jl = [random_law(rng, 3) for _ in range(k)]
    # at least one nondegenerate increment per step
    for j in range(k):
        if cl[j].size == 1 and jl[j].size == 1:
            cl[j] = IncrementLaw.symmetric(0.5)
    return DriverSpec(GridSpec(k, horizon), tuple(cl), tuple(jl))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
