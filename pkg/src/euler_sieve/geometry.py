"""Lattice of small obstacles in the plane and the perforated domain around them."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.spatial import cKDTree

# Relative tolerance used before flooring a count computed in floating point.
FLOOR_TOL = 1e-12


def as_complex(x) -> np.ndarray:
    """Points given as complex numbers or as (..., 2) real arrays -> complex array."""
    x = np.asarray(x)
    if np.iscomplexobj(x):
        return x
    x = x.astype(float)
    if x.shape[-1:] != (2,):
        raise ValueError(f"expected points of shape (..., 2), got {x.shape}")
    return x[..., 0] + 1j * x[..., 1]


def as_real(z) -> np.ndarray:
    z = np.asarray(z)
    return np.stack([z.real, z.imag], axis=-1)


@dataclass(frozen=True)
class ObstacleShape:
    """Reference obstacle K with 0 in its interior and K inside (-1, 1)^2.

    ``disk`` is the closed unit disk; ``ellipse`` has semi-axes ``p`` (along x)
    and ``q`` (along y) with ``0 < q <= p <= 1``.
    """

    kind: str = "disk"
    p: float = 1.0
    q: float = 1.0

    def __post_init__(self):
        if self.kind == "disk":
            object.__setattr__(self, "p", 1.0)
            object.__setattr__(self, "q", 1.0)
        elif self.kind == "ellipse":
            if not (0 < self.q <= self.p <= 1):
                raise ValueError(f"ellipse needs 0 < q <= p <= 1, got p={self.p}, q={self.q}")
        else:
            raise ValueError(f"unknown obstacle shape {self.kind!r}")

    @classmethod
    def disk(cls) -> "ObstacleShape":
        return cls("disk")

    @classmethod
    def ellipse(cls, p: float, q: float) -> "ObstacleShape":
        return cls("ellipse", p, q)

    @property
    def area(self) -> float:
        return math.pi * self.p * self.q

    def inside(self, z) -> np.ndarray:
        """Closed membership test in obstacle-local coordinates."""
        z = np.asarray(z)
        return (z.real / self.p) ** 2 + (z.imag / self.q) ** 2 <= 1.0

    def boundary(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return self.p * np.cos(t) + 1j * self.q * np.sin(t)

    def boundary_tangent(self, t) -> np.ndarray:
        """d/dt of :meth:`boundary` (counter-clockwise)."""
        t = np.asarray(t, dtype=float)
        return -self.p * np.sin(t) + 1j * self.q * np.cos(t)

    def radius(self, theta) -> np.ndarray:
        """Distance from the origin to the boundary along direction ``theta``."""
        c, s = np.cos(theta), np.sin(theta)
        return 1.0 / np.sqrt((c / self.p) ** 2 + (s / self.q) ** 2)


@dataclass(frozen=True)
class LatticeParams:
    eps: float
    alpha: float
    mu: float

    def __post_init__(self):
        if not (0 < self.eps < 1):
            raise ValueError(f"eps must lie in (0, 1), got {self.eps}")
        if self.alpha <= 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if not (0 <= self.mu <= 1):
            raise ValueError(f"mu must lie in [0, 1], got {self.mu}")

    @property
    def gap(self) -> float:
        """eps**alpha: half of the distance between neighbouring obstacles."""
        return self.eps ** self.alpha

    @property
    def pitch(self) -> float:
        """Distance between neighbouring centres, 2 (eps + eps^alpha)."""
        return 2.0 * (self.eps + self.gap)


def _exact_fraction(value: float) -> Fraction | None:
    # decimal inputs such as 0.1 are meant literally, not as their binary approximations
    text = repr(float(value))
    if "e" in text or "inf" in text or "nan" in text:
        return None
    return Fraction(text)


def _floor(x: float) -> int:
    return int(math.floor(x * (1.0 + FLOOR_TOL) + FLOOR_TOL))


def count_along_axis(eps: float, alpha: float) -> int:
    """N = [(1 + 2 eps^alpha) / (2 (eps + eps^alpha))]."""
    fe = _exact_fraction(eps)
    if fe is not None and float(alpha).is_integer():
        ga = fe ** int(alpha)
        return int((1 + 2 * ga) // (2 * (fe + ga)))
    ga = eps ** alpha
    return _floor((1 + 2 * ga) / (2 * (eps + ga)))


def count_vertical(n1: int, mu: float) -> int:
    if mu == 0:
        return 1
    if mu == 1:
        return n1
    return _floor(n1 ** mu)


@dataclass(frozen=True, eq=False)
class PerforatedDomain:
    params: LatticeParams
    shape: ObstacleShape
    n1: int
    n2: int
    centers: np.ndarray = field(repr=False)  # complex, shape (n2, n1): centers[j-1, i-1] = z_{i,j}

    @property
    def eps(self) -> float:
        return self.params.eps

    @property
    def count(self) -> int:
        return self.n1 * self.n2

    @property
    def rect(self) -> tuple[float, float, float, float]:
        """(x0, x1, y0, y1) of the rectangle holding every obstacle."""
        p, g = self.params.pitch, self.params.gap
        return (0.0, p * self.n1 - 2 * g, 0.0, p * self.n2 - 2 * g)

    @property
    def flat_centers(self) -> np.ndarray:
        """Row-major list of centres (i fastest)."""
        return self.centers.ravel()

    def center(self, i: int, j: int) -> complex:
        self.check_index(i, j)
        return complex(self.centers[j - 1, i - 1])

    def check_index(self, i: int, j: int) -> None:
        if not (1 <= i <= self.n1 and 1 <= j <= self.n2):
            raise IndexError(f"obstacle ({i}, {j}) outside 1..{self.n1} x 1..{self.n2}")

    def index_of(self, k: int) -> tuple[int, int]:
        j, i = divmod(k, self.n1)
        return i + 1, j + 1

    def nearest(self, x) -> tuple[np.ndarray, np.ndarray]:
        """1-based lattice indices (i, j) of the cell nearest to each point."""
        z = as_complex(x)
        p, e = self.params.pitch, self.eps
        i = np.clip(np.rint((z.real - e) / p).astype(int) + 1, 1, self.n1)
        j = np.clip(np.rint((z.imag - e) / p).astype(int) + 1, 1, self.n2)
        return i, j

    def local(self, x, i, j) -> np.ndarray:
        """(x - z_ij) / eps."""
        z = as_complex(x)
        return (z - self.centers[np.asarray(j) - 1, np.asarray(i) - 1]) / self.eps

    def cell_inf_distance(self, x, i, j) -> np.ndarray:
        z = as_complex(x)
        d = z - self.centers[np.asarray(j) - 1, np.asarray(i) - 1]
        return np.maximum(np.abs(d.real), np.abs(d.imag))

    def in_inclusion(self, x) -> np.ndarray:
        i, j = self.nearest(x)
        return self.shape.inside(self.local(x, i, j))

    def contains(self, x) -> np.ndarray:
        """True where the point lies in the fluid domain (outside every closed obstacle)."""
        return ~self.in_inclusion(x)

    def inclusion_measure(self) -> float:
        return self.count * self.eps ** 2 * self.shape.area

    def count_bound_holds(self) -> bool:
        """Whether n1 n2 <= (eps + eps^alpha)^-(1+mu) at this eps (reported, not enforced)."""
        e, g, mu = self.eps, self.params.gap, self.params.mu
        return self.count <= (e + g) ** (-(1 + mu)) * (1 + FLOOR_TOL)

    def boundary_points(self, i: int, j: int, n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Trapezoid nodes on the boundary of obstacle (i, j).

        Returns (points, unit outward normals, ds weights) with counter-clockwise order.
        """
        t = 2 * np.pi * np.arange(n) / n
        z = self.center(i, j) + self.eps * self.shape.boundary(t)
        dz = self.eps * self.shape.boundary_tangent(t)
        speed = np.abs(dz)
        normal = -1j * dz / speed
        return z, normal, speed * (2 * np.pi / n)

    def hausdorff_gap(self, n_grid: int = 200, n_boundary: int = 256) -> float:
        """Sampled Hausdorff distance between the union of obstacles and the rectangle.

        Obstacles lie inside the rectangle, so only sup_{x in R} d(x, union) matters.
        """
        x0, x1, y0, y1 = self.rect
        gx, gy = np.meshgrid(np.linspace(x0, x1, n_grid), np.linspace(y0, y1, n_grid))
        pts = (gx + 1j * gy).ravel()
        t = 2 * np.pi * np.arange(n_boundary) / n_boundary
        bnd = (self.flat_centers[:, None] + self.eps * self.shape.boundary(t)[None, :]).ravel()
        tree = cKDTree(as_real(bnd))
        d, _ = tree.query(as_real(pts))
        d[self.in_inclusion(pts)] = 0.0
        return float(d.max())

    def hausdorff_bound(self) -> float:
        return math.sqrt(2) * (self.eps + self.params.gap)

    def write_centers(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["i", "j", "x", "y"])
            for k, z in enumerate(self.flat_centers):
                i, j = self.index_of(k)
                w.writerow([i, j, repr(float(z.real)), repr(float(z.imag))])


def build_domain(params: LatticeParams, shape: ObstacleShape | None = None) -> PerforatedDomain:
    shape = shape or ObstacleShape.disk()
    n1 = count_along_axis(params.eps, params.alpha)
    if n1 < 1:
        raise ValueError(f"eps={params.eps} too large: no obstacle fits in [0, 1]")
    n2 = count_vertical(n1, params.mu)
    e, p = params.eps, params.pitch
    i = np.arange(n1)
    j = np.arange(n2)
    centers = (e + p * i)[None, :] + 1j * (e + p * j)[:, None]
    centers.setflags(write=False)
    return PerforatedDomain(params, shape, n1, n2, centers)


def brute_force_count(eps: float, alpha: float) -> int:
    """Place obstacles of width 2 eps separated by 2 eps^alpha from 0 until [0, 1] is full."""
    fe = _exact_fraction(eps)
    if fe is not None and float(alpha).is_integer():
        width, gap, one = 2 * fe, 2 * fe ** int(alpha), Fraction(1)
    else:
        width, gap, one = 2 * eps, 2 * eps ** alpha, 1.0 + 1e-12
    n, right = 0, width
    while right <= one:
        n += 1
        right += gap + width
    return n
