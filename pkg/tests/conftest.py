import numpy as np
import pytest
from hypothesis import settings
from hypothesis import strategies as st

from convexdens import TriangularMix, validate_sample

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")

pos = st.floats(min_value=0.01, max_value=10.0, allow_nan=False, allow_infinity=False)


@st.composite
def mixes(draw, max_m=5):
    m = draw(st.integers(1, max_m))
    knots = draw(st.lists(pos, min_size=m, max_size=m, unique=True))
    coefs = draw(st.lists(st.floats(0.01, 5.0), min_size=m, max_size=m))
    return TriangularMix(np.array(knots), np.array(coefs))


@st.composite
def samples(draw, min_n=1, max_n=30):
    vals = draw(st.lists(pos, min_size=min_n, max_size=max_n))
    return validate_sample(vals)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


@pytest.fixture
def criterion(capsys):
    """Record one pass/fail line for an acceptance criterion, then assert."""

    def record(label, ok, detail):
        line = f"[{'PASS' if ok else 'FAIL'}] {label}: {detail}"
        ACCEPTANCE_LINES.append(line)
        with capsys.disabled():
            print("\n" + line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
