import numpy as np
import pytest
from hypothesis import settings, strategies as st

from qising.trajectory import PiecewiseField, Trajectory

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


@st.composite
def trajectories(draw, beta=1.0, max_flips=6):
    n = draw(st.integers(0, max_flips))
    raw = draw(st.lists(st.floats(0.001, 0.999), min_size=n, max_size=n, unique=True))
    flips = tuple(sorted(beta * x for x in raw))
    sign = draw(st.sampled_from([1, -1]))
    return Trajectory(sign, flips, beta)


@st.composite
def fields(draw, beta=1.0, max_pieces=4, amp=2.0):
    k = draw(st.integers(1, max_pieces))
    cuts = draw(st.lists(st.floats(0.01, 0.99), min_size=k - 1, max_size=k - 1, unique=True))
    bps = (0.0, *sorted(beta * c for c in cuts), beta)
    vals = draw(st.lists(st.floats(-amp, amp), min_size=k, max_size=k))
    return PiecewiseField(bps, tuple(vals))


def pointwise_max(a: Trajectory, b: Trajectory) -> Trajectory:
    """Trajectory equal to max(a, b) at every time."""
    times = sorted(set((0.0,) + a.flips + b.flips))
    signs = [max(a(t), b(t)) for t in times]
    flips = tuple(t for t, s, prev in zip(times[1:], signs[1:], signs) if s != prev)
    return Trajectory(signs[0], flips, a.beta)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
