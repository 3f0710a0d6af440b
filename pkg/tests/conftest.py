import numpy as np
import pytest

from euler_sieve.field import QuadratureSpec, VorticitySpec
from euler_sieve.geometry import LatticeParams, ObstacleShape, build_domain


@pytest.fixture
def bump():
    return VorticitySpec("radial_bump", 0.5 + 0.55j, 0.3)


@pytest.fixture
def gauss():
    return VorticitySpec("gaussian_truncated", 0.5 + 0.55j, 0.3)


@pytest.fixture
def quad8():
    return QuadratureSpec(order=8)


@pytest.fixture
def disk_row():
    return build_domain(LatticeParams(0.1, 1.0, 0.0))


@pytest.fixture
def ellipse_row():
    return build_domain(LatticeParams(0.1, 1.0, 0.0), ObstacleShape.ellipse(1.0, 0.5))


def exterior_points(domain, n, seed=0):
    """Random fluid points inside the lattice rectangle."""
    rng = np.random.default_rng(seed)
    x0, x1, y0, y1 = domain.rect
    out = []
    while len(out) < n:
        z = rng.uniform(x0, x1, 4 * n) + 1j * rng.uniform(y0, y1, 4 * n)
        out.extend(z[domain.contains(z)])
    return np.array(out[:n])


ACCEPTANCE_LINES: list[str] = []


def record(line: str) -> None:
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
