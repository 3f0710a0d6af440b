"""Quadrature rules for the source integrals and for norms over regions.

Source integrals ``int kernel(x, y) f(y) dy`` over the support disk of f minus
obstacles are evaluated with rules built per evaluation point x:

* near the support, a polar rule centred at x (the Jacobian r cancels the 1/r
  kernel singularity), split in angle at the directions tangent to the support
  disk and to one excluded obstacle, with the excluded obstacle cut out of every ray;
* far from the support, a fixed polar rule centred on the support disk;
* other obstacles inside the support are subtracted with their own rules.

All rules return padded arrays ``(Y, W)`` of shape (nx, k) with ``W`` already
multiplied by f(Y), so any integral is ``sum(W * kernel(x[:, None], Y), axis=1)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .field import QuadratureSpec, VorticitySpec
from .geometry import PerforatedDomain, as_complex

TWO_PI = 2 * math.pi


@lru_cache(maxsize=64)
def gauss01(n: int) -> tuple[np.ndarray, np.ndarray]:
    s, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (s + 1), 0.5 * w


def clustered_panels(a, b, n):
    """Angles on panels [a, b] clustered at both ends (removes sqrt endpoint behaviour).

    a, b: (..., P). Returns theta, dtheta of shape (..., P, n).
    """
    s, w = gauss01(n)
    a = np.asarray(a)[..., None]
    L = np.asarray(b)[..., None] - a
    theta = a + L * 0.5 * (1 - np.cos(np.pi * s))
    dtheta = L * 0.5 * np.pi * np.sin(np.pi * s) * w
    return theta, dtheta


def ray_circle(x, u, c, R):
    """Parameter interval [t1, t2] (t >= 0) of the ray x + t u inside the disk |y - c| <= R.

    Empty intersections return t1 = t2 = 0.
    """
    d = x - c
    b = (np.conj(u) * d).real
    disc = b * b - (np.abs(d) ** 2 - R * R)
    ok = disc > 0
    sq = np.sqrt(np.where(ok, disc, 0.0))
    t1 = np.where(ok, np.maximum(-b - sq, 0.0), 0.0)
    t2 = np.where(ok, np.maximum(-b + sq, 0.0), 0.0)
    return t1, t2


def ray_ellipse(x, u, z0, a, b):
    """Like :func:`ray_circle` for the axis-aligned ellipse with semi-axes a, b about z0.

    Returns (t1, t2, hit) without clipping at t = 0.
    """
    X = ((x - z0).real / a) + 1j * ((x - z0).imag / b)
    U = (u.real / a) + 1j * (u.imag / b)
    A = np.abs(U) ** 2
    B = (np.conj(U) * X).real
    C = np.abs(X) ** 2 - 1
    disc = B * B - A * C
    hit = disc > 0
    sq = np.sqrt(np.where(hit, disc, 0.0))
    return (-B - sq) / A, (-B + sq) / A, hit


def ellipse_tangent_angles(x, z0, a, b):
    """Directions from x of the two tangent lines to the ellipse.

    Returns (theta1, theta2, outside) where outside is False for x strictly
    inside (angles then meaningless). For x on the boundary both tangents are the
    boundary tangent line, returned as the two opposite directions.
    """
    X = ((x - z0).real / a) + 1j * ((x - z0).imag / b)
    rX = np.abs(X)
    outside = rX >= 1 - 1e-12
    ang = np.angle(X)
    spread = np.arccos(np.clip(1 / np.maximum(rX, 1e-300), -1, 1))
    th = []
    for sgn in (1, -1):
        phi = ang + sgn * spread
        tp = z0 + a * np.cos(phi) + 1j * b * np.sin(phi)
        v = tp - x
        # on the boundary, tp == x: use the tangent vector instead
        tangent = (-a * np.sin(phi) + 1j * b * np.cos(phi)) * sgn
        small = np.abs(v) < 1e-12 * (a + b)
        v = np.where(small, tangent, v)
        th.append(np.angle(v))
    return th[0], th[1], outside


def _sorted_panels(bp):
    """bp: (nx, 4) breakpoints -> (a, b) panel limits covering a full turn."""
    bp = np.sort(np.mod(bp, TWO_PI), axis=1)
    a = bp
    b = np.concatenate([bp[:, 1:], bp[:, :1] + TWO_PI], axis=1)
    return a, b


@dataclass(frozen=True)
class HoleSet:
    """Axis-aligned elliptical obstacles: centers and semi-axes a (x), b (y)."""

    centers: np.ndarray
    a: float
    b: float

    @classmethod
    def from_domain(cls, domain: PerforatedDomain) -> "HoleSet":
        e = domain.eps
        return cls(np.asarray(domain.flat_centers), e * domain.shape.p, e * domain.shape.q)

    @classmethod
    def single(cls, center: complex, a: float, b: float) -> "HoleSet":
        return cls(np.array([complex(center)]), a, b)

    def __len__(self):
        return len(self.centers)


class SourceRule:
    """Per-point rules for integrals of f over supp f minus a set of obstacles."""

    def __init__(self, f: VorticitySpec, holes: HoleSet | None = None,
                 quad: QuadratureSpec | None = None, far_factor: float = 0.5):
        quad = quad or QuadratureSpec()
        self.f, self.holes, self.quad = f, holes, quad
        self.c, self.R = f.center, f.radius
        n = quad.order
        self.n_theta = max(8, n + n // 2)
        self.n_r = max(8, n + n // 2)
        self.far_factor = far_factor
        # fixed polar rule on the support disk
        s, w = gauss01(2 * n)
        nt = 4 * n
        th = TWO_PI * np.arange(nt) / nt
        edges = np.array([0.0, *f.panel_radii, 1.0]) * self.R
        L = np.diff(edges)
        r = (edges[:-1, None] + L[:, None] * s).ravel()
        wr = (L[:, None] * w).ravel() * r
        Y = (self.c + r[:, None] * np.exp(1j * th)[None, :]).ravel()
        W = wr[:, None] * np.full(nt, TWO_PI / nt)[None, :]
        W = W.ravel() * f(Y)
        keep = W != 0
        self._fixed = (Y[keep], W[keep])
        # holes that meet the support
        if holes is not None and len(holes):
            reach = np.abs(holes.centers - self.c) < self.R + max(holes.a, holes.b)
            self._hole_idx = np.flatnonzero(reach)
        else:
            self._hole_idx = np.array([], dtype=int)
        self._hole_fixed = self._fixed_hole_nodes()

    # -- obstacle pieces -------------------------------------------------
    def _fixed_hole_nodes(self):
        if not len(self._hole_idx):
            return None
        n = self.quad.order
        s, w = gauss01(max(6, n // 2 + 4))
        nt = max(12, n + 8)
        t = TWO_PI * np.arange(nt) / nt
        h = self.holes
        loc = (h.a * s[:, None] * np.cos(t)[None, :] + 1j * h.b * s[:, None] * np.sin(t)[None, :]).ravel()
        wl = (h.a * h.b * s * w)[:, None] * np.full(nt, TWO_PI / nt)[None, :]
        Y = h.centers[self._hole_idx][:, None] + loc[None, :]
        W = -wl.ravel()[None, :] * self.f(Y)
        return Y, W  # (H, m)

    def _near_hole_nodes(self, x, hidx):
        """x-centred rule on obstacle hidx (x outside it), negative weights. Shapes (nx, m)."""
        h = self.holes
        z0 = h.centers[hidx]
        t1, t2, _ = ellipse_tangent_angles(x, z0, h.a, h.b)
        to_c = np.angle(z0 - x)
        # put the cone [lo, hi] around the direction to the centre
        d1 = np.angle(np.exp(1j * (t1 - to_c)))
        d2 = np.angle(np.exp(1j * (t2 - to_c)))
        lo = to_c + np.minimum(d1, d2)
        hi = to_c + np.maximum(d1, d2)
        n = self.quad.order
        th, dth = clustered_panels(lo[:, None], hi[:, None], n)
        th, dth = th[:, 0, :], dth[:, 0, :]
        u = np.exp(1j * th)
        xa = x[:, None]
        r1, r2, hit = ray_ellipse(xa, u, z0[:, None], h.a, h.b)
        r1 = np.maximum(r1, 0)
        r2 = np.where(hit, np.maximum(r2, r1), r1)
        s, w = gauss01(n)
        L = (r2 - r1)[..., None]
        r = r1[..., None] + L * s
        Y = xa[..., None] + r * u[..., None]
        W = -(dth[..., None] * L * w * r)
        W = W * self.f(Y)
        return Y.reshape(len(x), -1), W.reshape(len(x), -1)

    # -- support disk pieces ---------------------------------------------
    def _polar_nodes(self, x, own):
        """x-centred polar rule on the support disk with obstacle ``own`` cut out.

        Angles are split where rays graze the support circle, the obstacle and any
        circle where the profile has a kink; each ray is split at every crossing.
        """
        nx = len(x)
        c = self.c
        circles = [self.R] + [k * self.R for k in self.f.panel_radii]
        n_bp = 2 * len(circles) + 2
        bp = np.zeros((nx, n_bp))
        d = c - x
        dist = np.abs(d)
        ang = np.angle(d)
        for k, Rk in enumerate(circles):
            outside = dist > Rk
            half = np.arcsin(np.clip(Rk / np.maximum(dist, 1e-300), 0, 1))
            bp[:, 2 * k] = np.where(outside, ang - half, 0.3 + k)
            bp[:, 2 * k + 1] = np.where(outside, ang + half, 0.3 + k + np.pi)
        has_own = own >= 0
        h = self.holes
        z0 = None
        if has_own.any():
            z0 = np.where(has_own, h.centers[np.maximum(own, 0)], 0)
            t1, t2, out_h = ellipse_tangent_angles(x, z0, h.a, h.b)
            use = has_own & out_h
            bp[:, -2] = np.where(use, t1, 0.5 * np.pi + 0.1)
            bp[:, -1] = np.where(use, t2, 1.5 * np.pi + 0.1)
        else:
            bp[:, -2] = 0.5 * np.pi + 0.1
            bp[:, -1] = 1.5 * np.pi + 0.1
        a, b = _sorted_panels(bp)
        th, dth = clustered_panels(a, b, self.n_theta)
        th = th.reshape(nx, -1)
        dth = dth.reshape(nx, -1)
        u = np.exp(1j * th)
        xa = x[:, None]
        s1, s2 = ray_circle(xa, u, c, self.R)
        cuts = [s1, s2]
        for Rk in self.f.panel_radii:
            cuts.extend(ray_circle(xa, u, c, Rk * self.R))
        hole_lo = hole_hi = None
        if z0 is not None:
            k1, k2, hit = ray_ellipse(xa, u, z0[:, None], h.a, h.b)
            hit = hit & has_own[:, None] & (k2 > 0)
            hole_lo = np.where(hit, np.maximum(k1, 0), -1.0)
            hole_hi = np.where(hit, k2, -1.0)
            cuts.extend([hole_lo, hole_hi])
        T = np.sort(np.clip(np.stack(cuts, axis=-1), s1[..., None], s2[..., None]), axis=-1)
        s, w = gauss01(self.n_r)
        Ys, Ws = [], []
        for k in range(T.shape[-1] - 1):
            r0, r1 = T[..., k], T[..., k + 1]
            L = r1 - r0
            if hole_lo is not None:
                mid = 0.5 * (r0 + r1)
                L = np.where((mid > hole_lo) & (mid < hole_hi), 0.0, L)
            L = L[..., None]
            if k == 0:  # may start at the evaluation point itself
                r = r0[..., None] + L * s * s
                wr = L * 2 * s * w * r
            else:
                r = r0[..., None] + L * s
                wr = L * w * r
            Ys.append(xa[..., None] + r * u[..., None])
            Ws.append(dth[..., None] * wr)
        Y = np.concatenate([y.reshape(nx, -1) for y in Ys], axis=1)
        W = np.concatenate([q.reshape(nx, -1) for q in Ws], axis=1)
        W = W * self.f(Y)
        return Y, W

    # -- public ----------------------------------------------------------
    def nodes(self, x, own=None):
        """Rules for every point of ``x`` (complex, 1D). ``own``: obstacle index cut out by rays, -1 for none."""
        x = np.atleast_1d(as_complex(x)).astype(complex)
        nx = len(x)
        if own is None:
            own = np.full(nx, -1)
        own = np.broadcast_to(np.asarray(own, dtype=int), (nx,)).copy()
        if self.holes is None:
            own[:] = -1
        near_supp = np.abs(x - self.c) < self.R * (1 + self.far_factor)
        own_meets = np.isin(own, self._hole_idx)
        polar = near_supp | own_meets
        Yp, Wp = self._fixed
        kf = len(Yp)
        parts_Y, parts_W = [], []
        # support disk part
        if polar.any():
            Yq, Wq = self._polar_nodes(x[polar], own[polar])
            k = max(kf, Yq.shape[1])
            Y = np.zeros((nx, k), complex)
            W = np.zeros((nx, k))
            Y[~polar, :kf] = Yp
            W[~polar, :kf] = Wp
            Y[polar, : Yq.shape[1]] = Yq
            W[polar, : Yq.shape[1]] = Wq
        else:
            Y = np.broadcast_to(Yp, (nx, kf)).copy()
            W = np.broadcast_to(Wp, (nx, kf)).copy()
        parts_Y.append(Y)
        parts_W.append(W)
        # subtract the other obstacles inside the support
        if self._hole_fixed is not None:
            Yh, Wh = self._hole_fixed
            H, m = Yh.shape
            h = self.holes
            centers = h.centers[self._hole_idx]
            dist = np.abs(x[:, None] - centers[None, :])
            is_own = self._hole_idx[None, :] == own[:, None]
            near = (dist < 3 * max(h.a, h.b)) & ~is_own
            mask = ~(near | is_own)
            parts_Y.append(np.broadcast_to(Yh.ravel(), (nx, H * m)))
            parts_W.append((mask[:, :, None] * Wh[None, :, :]).reshape(nx, H * m))
            n_near = near.sum(axis=1)
            if n_near.any():
                kmax = int(n_near.max())
                order = np.argsort(np.where(near, dist, np.inf), axis=1)[:, :kmax]
                for slot in range(kmax):
                    rows = np.flatnonzero(n_near > slot)
                    hidx = self._hole_idx[order[rows, slot]]
                    Yn, Wn = self._near_hole_nodes(x[rows], hidx)
                    Yfull = np.zeros((nx, Yn.shape[1]), complex)
                    Wfull = np.zeros((nx, Yn.shape[1]))
                    Yfull[rows] = Yn
                    Wfull[rows] = Wn
                    parts_Y.append(Yfull)
                    parts_W.append(Wfull)
        Y = np.concatenate(parts_Y, axis=1)
        W = np.concatenate(parts_W, axis=1)
        # park unused slots far away so kernels stay finite there
        # nodes closer than round-off to x carry negligible weight
        live = (W != 0) & (np.abs(Y - x[:, None]) > 1e-15 * (1 + np.abs(x[:, None])))
        return np.where(live, Y, self.parking), np.where(live, W, 0.0)

    @property
    def parking(self) -> complex:
        return self.c + 1e4 * (1 + self.R + abs(self.c))


# ---------------------------------------------------------------------------
# rules for norms over regions of evaluation points
# ---------------------------------------------------------------------------

def tensor_rule(x0, x1, y0, y1, n, nx_cells=1, ny_cells=1):
    s, w = gauss01(n)
    xs = np.linspace(x0, x1, nx_cells + 1)
    ys = np.linspace(y0, y1, ny_cells + 1)
    hx, hy = np.diff(xs), np.diff(ys)
    px = (xs[:-1, None] + hx[:, None] * s).ravel()
    wx = (hx[:, None] * w).ravel()
    py = (ys[:-1, None] + hy[:, None] * s).ravel()
    wy = (hy[:, None] * w).ravel()
    P = px[None, :] + 1j * py[:, None]
    W = wy[:, None] * wx[None, :]
    return P.ravel(), W.ravel()


def disk_rule(c, R, n):
    s, w = gauss01(n)
    nt = 2 * n
    th = TWO_PI * np.arange(nt) / nt
    r = R * s
    P = c + r[:, None] * np.exp(1j * th)[None, :]
    W = (R * w * r)[:, None] * np.full(nt, TWO_PI / nt)
    return P.ravel(), W.ravel()


def ellipse_rule(z0, a, b, n):
    """Mapped polar rule on the filled ellipse (centers may be an array)."""
    s, w = gauss01(n)
    nt = 2 * n
    t = TWO_PI * np.arange(nt) / nt
    loc = (a * s[:, None] * np.cos(t) + 1j * b * s[:, None] * np.sin(t)).ravel()
    wl = ((a * b * s * w)[:, None] * np.full(nt, TWO_PI / nt)).ravel()
    z0 = np.atleast_1d(z0)
    return (z0[:, None] + loc).ravel(), np.tile(wl, len(z0))


def cell_minus_hole_rule(z0, half, a, b, n, split=None):
    """Square [z0 +- half]^2 minus the ellipse (a, b) about z0, in four polar sectors.

    With ``split`` the radial range is broken at the square of half-width
    ``split`` so integrands with a kink there are integrated piecewise.
    """
    s, w = gauss01(n)
    # an elongated ellipse has a sharply varying polar radius: more angular panels
    m = 1 if a == b else math.ceil(2 * max(a, b) / min(a, b))
    Ps, Ws = [], []
    for k, j in ((k, j) for k in range(4) for j in range(m)):
        lo = -math.pi / 4 + k * math.pi / 2 + j * math.pi / (2 * m)
        th = lo + (math.pi / (2 * m)) * s
        dth = (math.pi / (2 * m)) * w
        proj = np.abs(np.cos(th - k * math.pi / 2))  # the dominant coordinate in this sector
        rk = 1 / np.sqrt((np.cos(th) / a) ** 2 + (np.sin(th) / b) ** 2)
        rs = half / proj
        edges = [rk, rs] if split is None else [rk, np.maximum(split / proj, rk), rs]
        for r0, r1 in zip(edges[:-1], edges[1:]):
            L = (r1 - r0)[:, None]
            r = r0[:, None] + L * s
            Ps.append(z0 + r * np.exp(1j * th)[:, None])
            Ws.append(dth[:, None] * L * w * r)
    return np.concatenate([p.ravel() for p in Ps]), np.concatenate([q.ravel() for q in Ws])


@dataclass(frozen=True)
class DiskRegion:
    center: complex
    radius: float

    def rule(self, quad: QuadratureSpec):
        if quad.scheme == "montecarlo":
            P, area = _halton_box(self.center.real - self.radius, self.center.real + self.radius,
                                  self.center.imag - self.radius, self.center.imag + self.radius, quad)
            inside = np.abs(P - self.center) <= self.radius
            return P[inside], np.full(inside.sum(), area / len(P))
        return disk_rule(self.center, self.radius, quad.order)


@dataclass(frozen=True)
class RectangleRegion:
    x0: float
    x1: float
    y0: float
    y1: float
    cells: int = 4

    def rule(self, quad: QuadratureSpec):
        if quad.scheme == "montecarlo":
            P, area = _halton_box(self.x0, self.x1, self.y0, self.y1, quad)
            return P, np.full(len(P), area / len(P))
        return tensor_rule(self.x0, self.x1, self.y0, self.y1, quad.order, self.cells, self.cells)


def _halton_box(x0, x1, y0, y1, quad):
    from scipy.stats import qmc

    pts = qmc.Halton(d=2, scramble=True, seed=quad.seed).random(quad.samples)
    P = (x0 + (x1 - x0) * pts[:, 0]) + 1j * (y0 + (y1 - y0) * pts[:, 1])
    return P, (x1 - x0) * (y1 - y0)


def _lattice_cells(domain: PerforatedDomain, box):
    """Lattice-aligned cells covering ``box``: (centers, half-width, obstacle index or -1)."""
    e, g, p = domain.eps, domain.params.gap, domain.params.pitch
    half = e + g
    x0, x1, y0, y1 = box
    # cells overlapping the box; a box edge on a cell edge does not pull in the neighbour
    tol = 1e-9
    i0, i1 = math.floor((x0 - e) / p + 0.5 + tol), math.ceil((x1 - e) / p - 0.5 - tol)
    j0, j1 = math.floor((y0 - e) / p + 0.5 + tol), math.ceil((y1 - e) / p - 0.5 - tol)
    ii, jj = np.meshgrid(np.arange(i0, i1 + 1), np.arange(j0, j1 + 1))
    ii, jj = ii.ravel(), jj.ravel()
    centers = (e + p * ii) + 1j * (e + p * jj)
    inside = (ii >= 0) & (ii < domain.n1) & (jj >= 0) & (jj < domain.n2)
    idx = np.where(inside, jj * domain.n1 + ii, -1)
    return centers, half, idx


@dataclass(frozen=True, eq=False)
class OmegaRegion:
    """The fluid part of ``box`` (snapped outward to the lattice cells)."""

    domain: PerforatedDomain
    box: tuple[float, float, float, float]

    def rule(self, quad: QuadratureSpec):
        d = self.domain
        if quad.scheme == "montecarlo":
            P, area = _halton_box(*self.box, quad)
            keep = d.contains(P)
            return P[keep], np.full(keep.sum(), area / len(P))
        centers, half, idx = _lattice_cells(d, self.box)
        a, b = d.eps * d.shape.p, d.eps * d.shape.q
        Ps, Ws = [], []
        plain = centers[idx < 0]
        if len(plain):
            P0, W0 = tensor_rule(-half, half, -half, half, quad.order)
            Ps.append((plain[:, None] + P0).ravel())
            Ws.append(np.tile(W0, len(plain)))
        P1, W1 = cell_minus_hole_rule(0j, half, a, b, quad.order)
        holed = centers[idx >= 0]
        Ps.append((holed[:, None] + P1).ravel())
        Ws.append(np.tile(W1, len(holed)))
        return np.concatenate(Ps), np.concatenate(Ws)


@dataclass(frozen=True, eq=False)
class CutoffSupportRegion:
    """Union over obstacles of supp(phi_ij) minus the obstacle: the lattice cells minus holes.

    Radial ranges are split at the inner plateau edge of the cut-off.
    """

    domain: PerforatedDomain

    def rule(self, quad: QuadratureSpec):
        d = self.domain
        e, g = d.eps, d.params.gap
        P1, W1 = cell_minus_hole_rule(0j, e + g, e * d.shape.p, e * d.shape.q, quad.order, split=e + g / 2)
        C = d.flat_centers
        return (C[:, None] + P1).ravel(), np.tile(W1, len(C))


@dataclass(frozen=True, eq=False)
class InclusionRegion:
    domain: PerforatedDomain

    def rule(self, quad: QuadratureSpec):
        d = self.domain
        return ellipse_rule(d.flat_centers, d.eps * d.shape.p, d.eps * d.shape.q, quad.order)


@dataclass(frozen=True, eq=False)
class WindowRegion:
    """A rectangle containing the whole lattice block, split into plain rectangles,
    fluid parts of the lattice cells and the obstacle interiors.

    ``parts`` selects "fluid", "inclusions" or "all".
    """

    domain: PerforatedDomain
    box: tuple[float, float, float, float]
    parts: str = "all"
    cells: int = 8

    def lattice_box(self):
        x0, x1, y0, y1 = self.domain.rect
        g = self.domain.params.gap
        return x0 - g, x1 + g, y0 - g, y1 + g

    def rule(self, quad: QuadratureSpec):
        d = self.domain
        X0, X1, Y0, Y1 = self.box
        l0, l1, m0, m1 = self.lattice_box()
        if not (X0 <= l0 and l1 <= X1 and Y0 <= m0 and m1 <= Y1):
            raise ValueError("window must contain the lattice block")
        Ps, Ws = [], []
        if self.parts in ("fluid", "all"):
            n = quad.order
            for rect in ((X0, X1, Y0, m0), (X0, X1, m1, Y1), (X0, l0, m0, m1), (l1, X1, m0, m1)):
                if rect[1] > rect[0] and rect[3] > rect[2]:
                    P, W = tensor_rule(*rect, n, self.cells, self.cells)
                    Ps.append(P)
                    Ws.append(W)
            half = d.eps + d.params.gap
            P1, W1 = cell_minus_hole_rule(0j, half, d.eps * d.shape.p, d.eps * d.shape.q, n)
            C = d.flat_centers
            Ps.append((C[:, None] + P1).ravel())
            Ws.append(np.tile(W1, len(C)))
        if self.parts in ("inclusions", "all"):
            P, W = ellipse_rule(d.flat_centers, d.eps * d.shape.p, d.eps * d.shape.q, quad.order)
            Ps.append(P)
            Ws.append(W)
        return np.concatenate(Ps), np.concatenate(Ws)
