import numpy as np
import pytest
from hypothesis import strategies as st

from ilrlab.mdp import FiniteMdp, MarkovChain

CRITERIA = {}


def record_criterion(number: int, passed: bool, detail: str) -> str:
    line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
    CRITERIA[number] = line
    print(line)
    return line


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for number in sorted(CRITERIA):
            terminalreporter.write_line(CRITERIA[number])


@pytest.fixture
def stay_go():
    """Two states; action 0 stays, action 1 moves to the other state; r(0, go) = 1."""
    t = np.zeros((2, 2, 2))
    t[0, 0, 0] = t[1, 0, 1] = 1.0
    t[0, 1, 1] = t[1, 1, 0] = 1.0
    r = np.zeros((2, 2))
    r[0, 1] = 1.0
    return FiniteMdp(t, r, 0)


@pytest.fixture
def sticky_chain():
    return MarkovChain(np.array([[0.9, 0.1], [0.2, 0.8]]))


@pytest.fixture
def cycle5():
    """Five-state ring: action 0 advances, action 1 stays put."""
    n = 5
    t = np.zeros((n, 2, n))
    for s in range(n):
        t[s, 0, (s + 1) % n] = 1.0
        t[s, 1, s] = 1.0
    return FiniteMdp(t, np.zeros((n, 2)), 0)


@st.composite
def distributions(draw, size=None, max_size=12, allow_zeros=True):
    n = size if size is not None else draw(st.integers(1, max_size))
    weights = draw(st.lists(
        st.floats(0.0 if allow_zeros else 1e-3, 1.0, allow_nan=False), min_size=n, max_size=n
    ))
    w = np.asarray(weights)
    if w.sum() <= 0:
        w[0] = 1.0
    return w / w.sum()


@st.composite
def distribution_pairs(draw, max_size=12):
    n = draw(st.integers(1, max_size))
    return draw(distributions(size=n)), draw(distributions(size=n))
