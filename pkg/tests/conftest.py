import numpy as np
import pytest
from hypothesis import settings, strategies as st

from camg.core import StrategyProfile

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")

ACCEPTANCE_LINES: list[str] = []


def odd_n(lo=3, hi=11):
    return st.integers(lo // 2, hi // 2).map(lambda m: 2 * m + 1)


prob = st.floats(0.0, 1.0, allow_nan=False)
interior_prob = st.floats(0.05, 0.95, allow_nan=False)


@st.composite
def profiles(draw, n=None, elements=prob, lo=3, hi=11):
    n = draw(odd_n(lo, hi)) if n is None else n
    return StrategyProfile(tuple(draw(st.lists(elements, min_size=n, max_size=n))))


def random_profiles(n: int, count: int, seed: int, lo=0.0, hi=1.0):
    rng = np.random.default_rng(seed)
    return [StrategyProfile(tuple(rng.uniform(lo, hi, n))) for _ in range(count)]


@pytest.fixture
def acceptance_log():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
