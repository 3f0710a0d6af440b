"""Riemann maps from the exterior of the reference obstacle onto the exterior of the unit disk.

Only shapes with a closed-form map are supported.  For the ellipse with semi-axes
p >= q the map is the inverse of the Joukowski-type transform

    T^{-1}(zeta) = ((p + q) zeta + (p - q) / zeta) / 2,

so T(z) = (z + sqrt(z^2 - c^2)) / (p + q) with c^2 = p^2 - q^2 and T(z) ~ beta z,
beta = 2 / (p + q).  The square root is evaluated as sqrt(z - c) * sqrt(z + c), whose
branch cut is the focal segment [-c, c], which lies inside the obstacle.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import ObstacleShape, PerforatedDomain, as_complex

BOUNDARY_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class ObstacleMap:
    shape: ObstacleShape
    beta: float = field(init=False)
    focal: float = field(init=False)
    h_sup: float = field(init=False)
    lip_T: float = field(init=False, default=float("nan"))
    lip_Tinv: float = field(init=False, default=float("nan"))

    def __post_init__(self):
        s = self.shape
        object.__setattr__(self, "beta", 1.0 if s.kind == "disk" else 2.0 / (s.p + s.q))
        object.__setattr__(self, "focal", 0.0 if s.kind == "disk" else math.sqrt(s.p**2 - s.q**2))
        object.__setattr__(self, "h_sup", self._measure_h_sup())

    @property
    def is_identity(self) -> bool:
        return self.shape.kind == "disk"

    def _sqrt(self, z):
        c = self.focal
        return np.sqrt(z - c) * np.sqrt(z + c)

    def forward(self, z, check: bool = True):
        """T(z) for z outside the open obstacle."""
        z = np.asarray(z, dtype=complex)
        if check and np.any(self._strictly_inside(z)):
            raise ValueError("map_forward called at a point inside the obstacle")
        if self.is_identity:
            return z.copy()
        s = self.shape
        return (z + self._sqrt(z)) / (s.p + s.q)

    def derivative(self, z):
        """T'(z), analytic."""
        z = np.asarray(z, dtype=complex)
        if self.is_identity:
            return np.ones_like(z)
        s = self.shape
        return (1.0 + z / self._sqrt(z)) / (s.p + s.q)

    def inverse(self, zeta, check: bool = True):
        zeta = np.asarray(zeta, dtype=complex)
        if check and np.any(np.abs(zeta) < 1 - BOUNDARY_TOL):
            raise ValueError("map_inverse called inside the unit disk")
        if self.is_identity:
            return zeta.copy()
        s = self.shape
        return 0.5 * ((s.p + s.q) * zeta + (s.p - s.q) / zeta)

    def inverse_derivative(self, zeta):
        zeta = np.asarray(zeta, dtype=complex)
        if self.is_identity:
            return np.ones_like(zeta)
        s = self.shape
        return 0.5 * ((s.p + s.q) - (s.p - s.q) / zeta**2)

    def _strictly_inside(self, z):
        s = self.shape
        return (z.real / s.p) ** 2 + (z.imag / s.q) ** 2 < 1 - 1e-9

    def h(self, z):
        """Bounded remainder T(z) - beta z."""
        return self.forward(z, check=False) - self.beta * np.asarray(z)

    def _measure_h_sup(self, n: int = 1000) -> float:
        if self.is_identity:
            return 0.0
        t = 2 * np.pi * np.arange(n) / n
        bnd = self.shape.boundary(t)
        far = np.exp(1j * t) * np.geomspace(1.0, 1e6, n)
        return float(max(np.abs(self.h(bnd)).max(), np.abs(self.h(far)).max()))

    def estimate_lipschitz(self, n_samples: int = 2000, seed: int = 0) -> tuple[float, float]:
        """Sampled Lipschitz constants of T on the obstacle exterior and of T^{-1} on |zeta| >= 1.

        Pairs are drawn close together near the boundary (where the derivative peaks)
        and across the whole region, so both local and chordal ratios are seen.
        """
        if n_samples < 100:
            raise ValueError("n_samples must be at least 100")
        if self.is_identity:
            return 1.0, 1.0
        rng = np.random.default_rng(seed)

        def exterior_disk(n):
            r = 1 + rng.exponential(0.5, n) ** 2
            return r * np.exp(2j * np.pi * rng.random(n))

        za, zb = exterior_disk(n_samples), exterior_disk(n_samples)
        near = za * (1 + 1e-3 * rng.random(n_samples)) * np.exp(1e-3j * rng.standard_normal(n_samples))
        zb = np.concatenate([zb, near])
        za = np.concatenate([za, za])
        xa, xb = self.inverse(za), self.inverse(zb)
        lip_inv = np.max(np.abs(xa - xb) / np.abs(za - zb))
        lip = np.max(np.abs(za - zb) / np.abs(xa - xb))
        return float(lip), float(lip_inv)

    def with_lipschitz(self, n_samples: int = 2000) -> "ObstacleMap":
        lt, li = self.estimate_lipschitz(n_samples)
        object.__setattr__(self, "lip_T", lt)
        object.__setattr__(self, "lip_Tinv", li)
        return self


def obstacle_map(shape: ObstacleShape) -> ObstacleMap:
    return ObstacleMap(shape)


def map_forward(m: ObstacleMap, z):
    return m.forward(z)


def map_inverse(m: ObstacleMap, zeta):
    return m.inverse(zeta)


def local_map(domain: PerforatedDomain, i: int, j: int, x, m: ObstacleMap | None = None):
    """T_ij(x) = T((x - z_ij) / eps)."""
    domain.check_index(i, j)
    m = m or ObstacleMap(domain.shape)
    return m.forward(domain.local(as_complex(x), i, j))


def local_map_inverse(domain: PerforatedDomain, i: int, j: int, zeta, m: ObstacleMap | None = None):
    """T_ij^{-1}(zeta) = eps T^{-1}(zeta) + z_ij."""
    domain.check_index(i, j)
    m = m or ObstacleMap(domain.shape)
    return domain.eps * m.inverse(zeta) + domain.center(i, j)


def local_derivative(domain: PerforatedDomain, i, j, x, m: ObstacleMap | None = None):
    """Complex derivative of T_ij at x; DT_ij^T v is conj(T_ij') * v in complex form."""
    m = m or ObstacleMap(domain.shape)
    return m.derivative(domain.local(as_complex(x), i, j)) / domain.eps


def annulus_constants(domain: PerforatedDomain, i: int, j: int, radii, n_theta: int = 720,
                      m: ObstacleMap | None = None) -> tuple[float, float]:
    """Measured (C1, C2) with C2 r/eps <= |T_ij| <= C1 r/eps on circles of radius r about z_ij."""
    m = m or ObstacleMap(domain.shape)
    z0, e = domain.center(i, j), domain.eps
    th = 2 * np.pi * np.arange(n_theta) / n_theta
    c1, c2 = 0.0, np.inf
    for r in np.atleast_1d(radii):
        x = z0 + r * np.exp(1j * th)
        loc = (x - z0) / e
        keep = ~domain.shape.inside(loc)
        if not keep.any():
            continue
        ratio = np.abs(m.forward(loc[keep])) / (r / e)
        c1, c2 = max(c1, ratio.max()), min(c2, ratio.min())
    return float(c1), float(c2)
