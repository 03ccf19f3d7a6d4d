import numpy as np
import pytest

from gtransfer.gfunction import Bernoulli, FiniteRange, LongRangeAdditive, example_finite_range
from gtransfer.shift_core import Alphabet

BIN = Alphabet(2)


@pytest.fixture
def fixture_g():
    return example_finite_range()


@pytest.fixture
def bernoulli():
    return Bernoulli([0.3, 0.7])


@pytest.fixture(params=[1.25, 1.75, 2.5], ids=lambda a: f"alpha={a}")
def long_range(request):
    return LongRangeAdditive(BIN, request.param, 0.05)


def random_finite_range(rng, S, k, delta=0.05):
    """Random normalized table with every entry >= delta."""
    cols = rng.dirichlet(np.ones(S), size=S ** (k - 1))
    cols = delta + (1 - S * delta) * cols
    table = cols.T.reshape(-1)
    return FiniteRange(Alphabet(S), k, table, delta=delta)


# criterion number -> summary line, filled by the acceptance suite
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
