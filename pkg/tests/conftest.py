import numpy as np
import pytest

from hbo2d import groundstate as gs
from hbo2d.biortho import Field2D, get_discretization
from hbo2d.model import ModelParams


@pytest.fixture(scope="session")
def hbo():
    return ModelParams.hbo()


@pytest.fixture(scope="session")
def disc256():
    return get_discretization(256, 10.0)


@pytest.fixture(scope="session")
def disc32():
    return get_discretization(32, 3.0)


@pytest.fixture(scope="session")
def ground_state(hbo, disc256):
    """Q at the reference grid (N=256, alpha=10, c=1)."""
    return gs.petviashvili(hbo, 1.0, disc=disc256)


@pytest.fixture(scope="session")
def small_ground_state(hbo):
    return gs.petviashvili(hbo, 1.0, disc=get_discretization(64, 4.0))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_field(disc, rng, scale=1.0):
    X, Y = disc.meshgrid()
    U = rng.standard_normal((disc.N, disc.N)) / (1 + X ** 2 + Y ** 2)
    return Field2D.from_physical(disc, scale * U)


# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE_LINES = {}


@pytest.fixture
def criterion():
    def record(number, ok, detail):
        ACCEPTANCE_LINES.setdefault(number, []).append((bool(ok), detail))
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_LINES):
        parts = ACCEPTANCE_LINES[number]
        ok = all(p[0] for p in parts)
        detail = "; ".join(p[1] for p in parts)
        terminalreporter.write_line(f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
