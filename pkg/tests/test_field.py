import math

import numpy as np
import pytest
from scipy import integrate
from hypothesis import given, settings, strategies as st

from euler_sieve.field import KINDS, QuadratureSpec, VorticitySpec, lp_norm, smoothstep
from euler_sieve.quadrature import DiskRegion, RectangleRegion


def test_smoothstep_endpoints():
    assert smoothstep(0.0) == 0.0 and smoothstep(1.0) == 1.0
    assert smoothstep(0.5) == pytest.approx(0.5)
    assert smoothstep(-1.0) == 0.0 and smoothstep(2.0) == 1.0


@pytest.mark.parametrize("kind", KINDS)
def test_support_and_bounds(kind):
    f = VorticitySpec(kind, 0.2 + 0.1j, 0.4, 2.5)
    assert f(0.2 + 0.1j) == pytest.approx(2.5)
    assert f(0.2 + 0.1j + 0.4) == 0.0
    assert f(np.array([5.0 + 0j]))[0] == 0.0
    x = 0.2 + 0.1j + np.linspace(0, 0.5, 200)
    assert np.all(np.abs(f(x)) <= f.linf_norm)


@pytest.mark.parametrize("kind", KINDS)
def test_mass_matches_quadrature(kind):
    f = VorticitySpec(kind, 0.3j, 0.7, -1.3)
    radial, _ = integrate.quad(lambda r: r * float(f.profile(r / 0.7)), 0, 0.7, points=[0.56],
                               epsabs=1e-15, limit=200)
    assert f.total_mass == pytest.approx(-1.3 * 2 * math.pi * radial, rel=1e-10)
    if not f.kinks:
        pts, w = DiskRegion(0.3j, 0.7).rule(QuadratureSpec(order=64))
        assert np.sum(w * f(pts)) == pytest.approx(f.total_mass, rel=1e-10)
    assert f.l1_norm == pytest.approx(abs(f.total_mass))


def test_gaussian_mass_closed_form():
    # truncated Gaussian with sigma = R/2: 2 pi sigma^2 (1 - e^{-2})
    f = VorticitySpec("gaussian_truncated", 0j, 1.0)
    assert f.total_mass == pytest.approx(2 * math.pi * 0.25 * (1 - math.exp(-2)), rel=1e-14)


def test_radial_velocity_far_field():
    f = VorticitySpec("radial_bump", 0j, 0.5)
    x = np.array([2.0 + 0j, 3j])
    u = f.radial_velocity(x)
    assert np.allclose(u, 1j * x * f.total_mass / (2 * math.pi * np.abs(x) ** 2), rtol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.1, 3.0), st.floats(0.1, 2.0))
def test_linearity_of_profiles(a, r):
    f = VorticitySpec("patch_indicator_smooth", 0j, r, a)
    x = np.linspace(0, 1.2 * r, 50) + 0j
    assert np.allclose(f(x), a * VorticitySpec("patch_indicator_smooth", 0j, r)(x), rtol=1e-14)
    assert f.scaled(2.0).total_mass == pytest.approx(2 * f.total_mass)


def test_lp_norms_closed_form():
    one = lambda z: np.ones(z.shape)
    assert lp_norm(one, 2, RectangleRegion(0, 2, 0, 3)).value == pytest.approx(math.sqrt(6), rel=1e-13)
    assert lp_norm(one, 1, DiskRegion(0j, 1.0)).value == pytest.approx(math.pi, rel=1e-13)
    assert lp_norm(lambda z: z.real, math.inf, RectangleRegion(0, 2, 0, 1)).value <= 2.0
    r = lp_norm(lambda z: 1j * z, 2, DiskRegion(0j, 1.0))
    assert r.value == pytest.approx(math.sqrt(math.pi / 2), rel=1e-12) and not r.flagged


def test_montecarlo_agrees_with_tensor():
    f = VorticitySpec("gaussian_truncated", 0.5 + 0.5j, 0.4)
    reg = RectangleRegion(0, 1, 0, 1)
    t = lp_norm(f, 2, reg)
    m = lp_norm(f, 2, reg, QuadratureSpec("montecarlo", samples=100_000))
    assert abs(t.value - m.value) <= 3 * (t.err_estimate + m.err_estimate) + 5e-3 * t.value


def test_refinement_error_estimate_is_honest():
    f = VorticitySpec("patch_indicator_smooth", 0.5 + 0.5j, 0.3)
    coarse = lp_norm(f, 2, RectangleRegion(0, 1, 0, 1), QuadratureSpec(order=4))
    fine = lp_norm(f, 2, RectangleRegion(0, 1, 0, 1), QuadratureSpec(order=32))
    assert abs(coarse.value - fine.value) <= coarse.err_estimate + fine.err_estimate


def test_bad_specs_rejected():
    with pytest.raises(ValueError):
        VorticitySpec("vortex_sheet")
    with pytest.raises(ValueError):
        VorticitySpec("radial_bump", 0j, -1.0)
    with pytest.raises(ValueError):
        QuadratureSpec(order=1)
    with pytest.raises(ValueError):
        lp_norm(lambda z: z, 0.5, DiskRegion(0j, 1.0))
