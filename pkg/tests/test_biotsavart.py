import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from euler_sieve.biotsavart import (Treecode, blob_factor, exterior_obstacle_evaluator, point_kernel,
                                    regularized_log, sum_kernel, velocity_exterior_disk,
                                    velocity_exterior_obstacle, velocity_plane)
from euler_sieve.conformal import ObstacleMap
from euler_sieve.field import KINDS, QuadratureSpec, VorticitySpec
from euler_sieve.geometry import LatticeParams, ObstacleShape, build_domain
from euler_sieve.quadrature import DiskRegion

Q = QuadratureSpec(order=12)


def test_kernel_basics():
    assert point_kernel(1.0 + 0j, 1.0 + 0j) == 0
    assert point_kernel(1.0 + 0j, 0j) == pytest.approx(1j)
    assert blob_factor(np.array([0.0]), 0.1)[0] == 0.0
    assert blob_factor(np.array([1.0]), 0.0)[0] == 1.0
    # the regularised log is continuous through its small-argument branch
    s = np.array([0.99999e-4, 1.00001e-4]) * 0.1
    assert abs(np.diff(regularized_log(s, 0.1))[0]) < 1e-10


def test_regularized_log_gradient_matches_blob():
    s, h, d = np.linspace(0.01, 0.5, 40), 1e-6, 0.1
    fd = (regularized_log(s + h, d) - regularized_log(s - h, d)) / (2 * h)
    assert np.allclose(fd, blob_factor(s, d) / s, rtol=1e-7)


@settings(max_examples=30, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.integers(0, 2**31))
def test_sum_kernel_linear_in_weights(a, b, seed):
    rng = np.random.default_rng(seed)
    Y = rng.normal(size=50) + 1j * rng.normal(size=50)
    W1, W2 = rng.normal(size=50), rng.normal(size=50)
    x = rng.normal(size=7) + 1j * rng.normal(size=7)
    lhs = sum_kernel(x, Y, a * W1 + b * W2, 0.05)
    rhs = a * sum_kernel(x, Y, W1, 0.05) + b * sum_kernel(x, Y, W2, 0.05)
    assert np.allclose(lhs, rhs, rtol=1e-10, atol=1e-10)


@pytest.mark.parametrize("kind", KINDS)
def test_plane_velocity_exact_for_radial(kind):
    f = VorticitySpec(kind, 0.4 + 0.2j, 0.5, 1.7)
    x = 0.4 + 0.2j + np.array([0.0, 0.1, 0.25j, 0.399 + 0.1j, -0.5, 0.7j, 2.0])
    # the patch has a C2 kink circle and the truncated Gaussian a jump at the support edge
    tol = {"radial_bump": 1e-10, "gaussian_truncated": 1e-9}.get(kind, 1e-7)
    assert np.max(np.abs(velocity_plane(f, x, Q) - f.radial_velocity(x))) < tol


def test_plane_velocity_linear_in_amplitude():
    f = VorticitySpec("radial_bump", 0.4 + 0.2j, 0.5)
    x = np.array([0.3 + 0.3j, 1.0 + 0j])
    assert np.allclose(velocity_plane(f.scaled(-2.5), x, Q), -2.5 * velocity_plane(f, x, Q), rtol=1e-12)


def test_curl_of_plane_velocity(disk_row, bump):
    h = 1e-4
    g = 0.5 + 0.55j + 0.2 * np.exp(2j * np.pi * np.arange(8) / 8) * np.array([0, .5, 1, .5, 0, .5, 1, .5])
    u = lambda z: velocity_plane(bump, z, Q)
    curl = ((u(g + h) - u(g - h)).imag - (u(g + 1j * h) - u(g - 1j * h)).real) / (2 * h)
    assert np.allclose(curl, bump(g), rtol=1e-3, atol=1e-3 * bump.linf_norm)


@pytest.mark.parametrize("kind", KINDS)
def test_uniform_velocity_bound(kind):
    # |K[f]| <= ||f||_1^{1/2} ||f||_inf^{1/2} / sqrt(pi) by rearrangement
    for r in (0.1, 0.4, 1.0):
        f = VorticitySpec(kind, 0j, r)
        x = r * np.linspace(0.01, 2.0, 60) + 0j
        ratio = np.max(np.abs(f.radial_velocity(x))) / math.sqrt(f.l1_norm * f.linf_norm)
        assert ratio <= 1 / math.sqrt(math.pi)


def test_treecode_matches_direct():
    rng = np.random.default_rng(3)
    Y = rng.normal(size=3000) + 1j * rng.normal(size=3000)
    W = rng.uniform(-1, 1, 3000)
    x = np.concatenate([rng.normal(size=200) * 1.5 + 1j * rng.normal(size=200), Y[:40]])
    for delta in (0.0, 0.05):
        direct = sum_kernel(x, Y, W, delta) / (2 * math.pi)
        tree = Treecode(Y, W, delta=delta).velocity(x)
        assert np.max(np.abs(tree - direct) / np.abs(direct)) < 1e-6


def _fine_rule(f):
    return DiskRegion(f.center, f.radius).rule(QuadratureSpec(order=64))


def test_exterior_disk_matches_point_vortex_images():
    f = VorticitySpec("radial_bump", 1.6 + 0.3j, 0.4)
    P, Wq = _fine_rule(f)
    G = Wq * f(P)
    x = np.array([1.0 + 0j, np.exp(2j), -1.5 + 0.2j, 2.5 - 1j])
    z = x[:, None]
    # u - iv = sum G / (2 pi i) [1/(z - y) - 1/(z - 1/conj y) + 1/z]
    dw = (G / (2j * math.pi) * (1 / (z - P) - 1 / (z - 1 / np.conj(P)) + 1 / z)).sum(axis=1)
    assert np.max(np.abs(velocity_exterior_disk(f, x, Q) - np.conj(dw))) < 1e-10


def test_exterior_disk_tangent_and_circulation_free():
    f = VorticitySpec("gaussian_truncated", 1.5j, 0.45)
    t = 2 * np.pi * np.arange(360) / 360
    n = np.exp(1j * t)
    u = velocity_exterior_disk(f, n, Q)
    assert np.max(np.abs((np.conj(n) * u).real)) < 1e-12
    # trapezoid error of the image kernel on 360 nodes is about 1.05^-360
    assert abs(np.mean((np.conj(1j * n) * u).real) * 2 * np.pi) < 1e-9
    with pytest.raises(ValueError):
        velocity_exterior_disk(VorticitySpec("radial_bump", 0j, 0.5), np.array([2.0 + 0j]))


def test_exterior_ellipse_matches_stream_function():
    d = build_domain(LatticeParams(0.1, 1.0, 0.0), ObstacleShape.ellipse(1.0, 0.5))
    f = VorticitySpec("radial_bump", 0.5 + 0.3j, 0.12)
    z0, e = d.center(2, 1), d.eps
    m = ObstacleMap(d.shape)
    P, Wq = _fine_rule(f)
    G = Wq * f(P)
    eta = m.forward((P - z0) / e)

    def psi(x):
        zeta = m.forward((x - z0) / e)[:, None]
        g = np.log(np.abs(zeta - eta)) - np.log(np.abs(zeta - 1 / np.conj(eta))) + np.log(np.abs(zeta))
        return (G * g).sum(axis=1) / (2 * math.pi)

    x = z0 + np.array([0.11 + 0.03j, -0.2j, 0.3 - 0.1j, -0.05 + 0.08j])
    h = 1e-5
    grad = (psi(x + h) - psi(x - h)) / (2 * h) + 1j * (psi(x + 1j * h) - psi(x - 1j * h)) / (2 * h)
    assert np.max(np.abs(velocity_exterior_obstacle(d, 2, 1, f, x, Q) - 1j * grad)) < 1e-8


@pytest.mark.parametrize("shape", [ObstacleShape.disk(), ObstacleShape.ellipse(1.0, 0.5)])
def test_exterior_obstacle_disk_agrees_with_scaled_disk_law(shape):
    d = build_domain(LatticeParams(0.1, 1.0, 0.0), shape)
    f = VorticitySpec("radial_bump", 0.5 + 0.3j, 0.09)
    ev = exterior_obstacle_evaluator(d, 2, 1, f, Q)
    zb, nb, _ = d.boundary_points(2, 1, 360)
    u = ev(zb)
    assert np.max(np.abs((np.conj(nb) * u).real)) < 1e-12
    if shape.kind == "disk":
        z0, e = d.center(2, 1), d.eps
        g = VorticitySpec(f.kind, (f.center - z0) / e, f.radius / e, f.amplitude * e * e)
        x = z0 + np.array([0.15 + 0j, 0.2 - 0.1j])
        assert np.allclose(ev(x), velocity_exterior_disk(g, (x - z0) / e, Q) / e, rtol=1e-10)


def test_stream_function_forms_differ_by_a_constant():
    # with or without the eps / beta scale inside the log, the obstacle stream function
    # changes by a constant, so both give the same velocity
    d = build_domain(LatticeParams(0.1, 1.0, 0.0), ObstacleShape.ellipse(1.0, 0.5))
    f = VorticitySpec("radial_bump", 0.5 + 0.3j, 0.12)
    z0, e = d.center(2, 1), d.eps
    m = ObstacleMap(d.shape)
    P, Wq = _fine_rule(f)
    G = Wq * f(P)
    eta = m.forward((P - z0) / e)

    def psi(x, scaled):
        zeta = m.forward((x - z0) / e)[:, None]
        g = np.log(np.abs(zeta - eta) / (np.abs(eta) * np.abs(zeta - 1 / np.conj(eta)))) + np.log(np.abs(zeta))
        if scaled:
            g = g + np.log(e / m.beta)
        return (G * g).sum(axis=1) / (2 * math.pi)

    x = z0 + np.array([0.11 + 0.03j, -0.2j, 0.3 - 0.1j, -0.05 + 0.08j, 0.5 + 0.5j])
    diff = psi(x, True) - psi(x, False)
    assert np.ptp(diff) < 1e-14 and abs(diff[0]) > 1e-3
