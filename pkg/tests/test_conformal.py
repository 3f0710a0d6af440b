import numpy as np
from hypothesis import given, settings, strategies as st

from euler_sieve.conformal import ObstacleMap, local_map, local_map_inverse
from euler_sieve.geometry import ObstacleShape

SHAPES = [ObstacleShape.disk(), ObstacleShape.ellipse(1.0, 0.5), ObstacleShape.ellipse(1.0, 0.2)]


def _outside(shape, n, rng):
    t = rng.uniform(0, 2 * np.pi, n)
    s = rng.uniform(1.001, 20.0, n)
    return s * shape.boundary(t)


def test_round_trip():
    rng = np.random.default_rng(1)
    for shape in SHAPES:
        m = ObstacleMap(shape)
        z = _outside(shape, 10_000, rng)
        assert np.max(np.abs(m.inverse(m.forward(z)) - z) / np.abs(z)) < 1e-12
        zeta = rng.uniform(1.0001, 20, 10_000) * np.exp(1j * rng.uniform(0, 2 * np.pi, 10_000))
        assert np.max(np.abs(m.forward(m.inverse(zeta)) - zeta) / np.abs(zeta)) < 1e-12


def test_boundary_to_unit_circle():
    for shape in SHAPES:
        t = np.linspace(0, 2 * np.pi, 361)
        assert np.allclose(np.abs(ObstacleMap(shape).forward(shape.boundary(t), check=False)), 1, atol=1e-12)


def test_no_branch_jumps():
    # a path circling the obstacle twice, crossing every axis
    t = np.arange(0, 4 * np.pi, 1e-4)
    path = (1.4 + 0.3 * np.sin(3 * t)) * ObstacleShape.ellipse(1.0, 0.5).boundary(t)
    m = ObstacleMap(ObstacleShape.ellipse(1.0, 0.5))
    assert np.max(np.abs(np.diff(m.forward(path)))) < 1e-3
    dz = np.abs(np.diff(path))
    assert np.max(np.abs(np.diff(m.forward(path))) / dz) < 10


def test_beta_at_infinity():
    for shape in SHAPES:
        m = ObstacleMap(shape)
        z = 1e6 * np.exp(1j * np.linspace(0, 2 * np.pi, 50, endpoint=False))
        assert np.max(np.abs(m.forward(z) / z - m.beta)) < 1e-6


def test_h_bounded_and_decaying():
    rng = np.random.default_rng(2)
    for shape in SHAPES:
        m = ObstacleMap(shape)
        z = _outside(shape, 2000, rng)
        assert np.max(np.abs(m.h(z))) <= m.h_sup * (1 + 1e-9)
        far = 50 * np.exp(1j * rng.uniform(0, 2 * np.pi, 100))
        d1 = np.abs(m.h(far) - m.h(2 * far))
        d2 = np.abs(m.h(2 * far) - m.h(4 * far))
        assert np.all(d2 <= 0.51 * d1 + 1e-15)


@settings(max_examples=50, deadline=None)
@given(st.floats(1.05, 5.0), st.floats(0, 2 * np.pi))
def test_derivative_matches_difference(r, th):
    m = ObstacleMap(ObstacleShape.ellipse(1.0, 0.5))
    z = r * ObstacleShape.ellipse(1.0, 0.5).boundary(th)
    h = 1e-6
    fd = (m.forward(z + h) - m.forward(z - h)) / (2 * h)
    assert abs(fd - m.derivative(z)) < 1e-7


def test_lipschitz_estimates_are_sane():
    m = ObstacleMap(ObstacleShape.ellipse(1.0, 0.5)).with_lipschitz(500)
    assert m.lip_T >= m.beta and m.lip_Tinv >= 1 / m.beta
    assert ObstacleMap(ObstacleShape.disk()).with_lipschitz(500).lip_T == 1.0


def test_local_map_round_trip(ellipse_row):
    x = ellipse_row.center(2, 1) + 0.13 + 0.07j
    z = local_map(ellipse_row, 2, 1, x)
    assert abs(local_map_inverse(ellipse_row, 2, 1, z) - x) < 1e-14
