import numpy as np
import pytest
from hypothesis import settings, strategies as st

from qftrace.mobius import MobiusElement

settings.register_profile("default", deadline=None, max_examples=50)
settings.load_profile("default")

_coord = st.floats(-2.0, 2.0, allow_nan=False, allow_infinity=False)


@st.composite
def sl2c(draw):
    """Random SL(2,C) element with moderate entries."""
    a, b, c, d = (complex(draw(_coord), draw(_coord)) for _ in range(4))
    det = a * d - b * c
    if abs(det) < 0.1:
        a, d = a + 1.5, d + 1.5
        det = a * d - b * c
    if abs(det) < 0.1:
        a, b, c, d = 1, b, 0, 1
        det = 1
    return MobiusElement.from_matrix([[a, b], [c, d]])


@st.composite
def su11(draw):
    """Random disk automorphism [[alpha, beta], [conj beta, conj alpha]]."""
    r = draw(st.floats(0.0, 1.5))
    phi = draw(st.floats(-np.pi, np.pi))
    psi = draw(st.floats(-np.pi, np.pi))
    alpha = np.cosh(r) * np.exp(1j * phi)
    beta = np.sinh(r) * np.exp(1j * psi)
    return MobiusElement(alpha, beta, np.conj(beta), np.conj(alpha))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
