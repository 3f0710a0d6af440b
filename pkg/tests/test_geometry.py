import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from euler_sieve.geometry import (LatticeParams, ObstacleShape, brute_force_count, build_domain,
                                  count_along_axis, count_vertical)

eps_st = st.floats(0.02, 0.3)
alpha_st = st.floats(0.3, 2.5)
mu_st = st.floats(0.0, 1.0)


def test_counts_known_values():
    assert count_along_axis(0.1, 1.0) == 3
    assert count_along_axis(0.05, 1.0) == 5
    assert count_vertical(5, 0.7) == 3
    assert count_vertical(5, 0.0) == 1
    assert count_vertical(4, 1.0) == 4


@settings(max_examples=60, deadline=None)
@given(eps_st, alpha_st)
def test_count_matches_brute_force(eps, alpha):
    assert count_along_axis(eps, alpha) == brute_force_count(eps, alpha)


@settings(max_examples=30, deadline=None)
@given(eps_st, alpha_st, mu_st)
def test_centers_equally_spaced(eps, alpha, mu):
    d = build_domain(LatticeParams(eps, alpha, mu))
    pitch = 2 * (eps + eps ** alpha)
    assert d.centers.shape == (d.n2, d.n1)
    if d.n1 > 1:
        assert np.allclose(np.diff(d.centers, axis=1), pitch, rtol=0, atol=1e-13)
    if d.n2 > 1:
        assert np.allclose(np.diff(d.centers, axis=0), 1j * pitch, rtol=0, atol=1e-13)
    assert d.center(1, 1) == complex(eps, eps)
    assert d.count_bound_holds()


def test_row_major_enumeration(disk_row):
    d = build_domain(LatticeParams(0.05, 1.0, 0.7))
    for k in range(d.count):
        i, j = d.index_of(k)
        assert d.flat_centers[k] == d.center(i, j)
    with pytest.raises(IndexError):
        d.check_index(d.n1 + 1, 1)


def test_inclusion_measure_shrinks():
    vals = [build_domain(LatticeParams(e, 1.0, 0.0)).inclusion_measure() for e in (0.1, 0.05, 0.025, 0.0125)]
    assert all(b < a for a, b in zip(vals, vals[1:]))


def test_membership_ellipse():
    s = ObstacleShape.ellipse(1.0, 0.5)
    assert s.inside(0.99 + 0j) and not s.inside(0.0 + 0.51j)
    assert s.area == pytest.approx(np.pi * 0.5)


def test_hausdorff_within_bound():
    d = build_domain(LatticeParams(0.1, 1.0, 0.0))
    assert d.hausdorff_gap() <= d.hausdorff_bound()


def test_invalid_params():
    with pytest.raises(ValueError):
        LatticeParams(0.0, 1.0, 0.0)
    with pytest.raises(ValueError):
        LatticeParams(0.1, 1.0, 1.5)


def test_write_centers(tmp_path, disk_row):
    p = tmp_path / "c.csv"
    disk_row.write_centers(p)
    lines = p.read_text().splitlines()
    assert lines[0] == "i,j,x,y" and len(lines) == 1 + disk_row.count
