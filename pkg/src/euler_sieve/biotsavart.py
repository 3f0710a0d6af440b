"""Velocity laws recovered from a scalar vorticity.

Velocities are complex numbers u1 + i u2.  In that notation the plane kernel
(x - y)^perp / |x - y|^2 is i / conj(x - y).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import exp1

from .conformal import ObstacleMap
from .field import QuadratureSpec, VorticitySpec
from .geometry import PerforatedDomain, as_complex, as_real
from .quadrature import HoleSet, SourceRule

TWO_PI = 2 * math.pi
EULER_GAMMA = 0.5772156649015329


@dataclass(frozen=True, eq=False)
class VelocityEvaluator:
    """A pure map x -> u(x) tagged with where it came from.

    Calling it with complex points returns complex velocities; :meth:`vector`
    takes and returns (..., 2) real arrays.
    """

    provenance: str
    func: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    inputs: dict = field(default_factory=dict, repr=False)

    def __call__(self, x):
        z = np.asarray(as_complex(x), dtype=complex)
        return np.asarray(self.func(z.ravel())).reshape(z.shape)

    def vector(self, x):
        return as_real(self(x))

    def __add__(self, other: "VelocityEvaluator"):
        return VelocityEvaluator(f"{self.provenance}+{other.provenance}", lambda z: self.func(z) + other.func(z))

    def __sub__(self, other: "VelocityEvaluator"):
        return VelocityEvaluator(f"{self.provenance}-{other.provenance}", lambda z: self.func(z) - other.func(z))


# ---------------------------------------------------------------------------
# mollified kernels (vortex blobs)
# ---------------------------------------------------------------------------

def blob_factor(s, delta):
    """1 - exp(-s^2 / delta^2): Gaussian-blob mollifier of the 1/s kernel (1 for delta = 0)."""
    if delta == 0:
        return np.ones_like(np.asarray(s, dtype=float))
    return -np.expm1(-(np.asarray(s) / delta) ** 2)


def regularized_log(s, delta):
    """ln s + E1(s^2/delta^2)/2, the stream function whose gradient carries :func:`blob_factor`.

    Finite at s = 0 where it equals ln(delta) - gamma/2.
    """
    s = np.asarray(s, dtype=float)
    if delta == 0:
        with np.errstate(divide="ignore"):
            return np.log(s)
    u = (s / delta) ** 2
    out = np.empty_like(s)
    small = u < 1e-8
    with np.errstate(divide="ignore"):
        out[~small] = np.log(s[~small]) + 0.5 * exp1(u[~small])
    # ln u + E1(u) = -gamma + u + O(u^2)
    out[small] = math.log(delta) + 0.5 * (-EULER_GAMMA + u[small])
    return out


def point_kernel(x, y, delta=0.0):
    """i / conj(x - y) times the blob factor, zero at coincident points."""
    d = x - y
    s = np.abs(d)
    with np.errstate(divide="ignore", invalid="ignore"):
        k = 1j * blob_factor(s, delta) / np.conj(d)
    return np.where(s > 0, k, 0)


def sum_kernel(x, Y, W, delta=0.0, chunk=2048):
    """sum_k W_k i/conj(x - Y_k) for shared sources (Y, W of shape (m,)), chunked over x."""
    x = np.asarray(x, dtype=complex)
    out = np.empty(x.shape, dtype=complex)
    for a in range(0, len(x), chunk):
        xa = x[a:a + chunk, None]
        out[a:a + chunk] = (W * point_kernel(xa, Y, delta)).sum(axis=1)
    return out


# ---------------------------------------------------------------------------
# treecode
# ---------------------------------------------------------------------------

class Treecode:
    """Barnes-Hut style summation of sum_k W_k / (x - Y_k) with Laurent expansions.

    Boxes are accepted when size / distance < theta; ``order`` terms give a
    relative error of about theta^order.  The plane velocity is i conj(...) of
    the sum, and nearby boxes are summed directly with the blob mollifier.
    """

    def __init__(self, Y, W, theta: float = 0.5, order: int = 24, leaf: int = 64, delta: float = 0.0):
        self.Y = np.asarray(Y, dtype=complex)
        self.W = np.asarray(W, dtype=float)
        self.theta, self.order, self.leaf, self.delta = theta, order, leaf, delta
        self.boxes = []  # (center, half, idx array, children, coeffs)
        lo = np.array([self.Y.real.min(), self.Y.imag.min()])
        hi = np.array([self.Y.real.max(), self.Y.imag.max()])
        half = 0.5 * float((hi - lo).max()) * (1 + 1e-9) + 1e-300
        c = complex(0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1]))
        self.root = self._build(np.arange(len(self.Y)), c, half)

    def _build(self, idx, c, half):
        k = np.arange(self.order)
        d = self.Y[idx] - c
        coeffs = (self.W[idx, None] * d[:, None] ** k).sum(axis=0)
        node = {"c": c, "half": half, "idx": idx, "coeffs": coeffs, "kids": []}
        if len(idx) > self.leaf and half > 1e-12:
            right = self.Y[idx].real >= c.real
            top = self.Y[idx].imag >= c.imag
            h2 = half / 2
            for rx in (False, True):
                for ty in (False, True):
                    sel = idx[(right == rx) & (top == ty)]
                    if len(sel):
                        cc = c + complex(h2 if rx else -h2, h2 if ty else -h2)
                        node["kids"].append(self._build(sel, cc, h2))
        return node

    def _eval(self, node, x, out, sel):
        if not len(sel):
            return
        dist = np.abs(x[sel] - node["c"])
        reach = node["half"] * math.sqrt(2)
        # far boxes skip the mollifier, so they must also sit well beyond the blob radius
        far = (reach < self.theta * dist) & (dist - reach > 6 * self.delta)
        if far.any():
            xs = sel[far]
            inv = 1.0 / (x[xs] - node["c"])
            # sum_k a_k / (x - c)^(k+1), Horner in 1/(x - c)
            acc = np.zeros(len(xs), dtype=complex)
            for a in node["coeffs"][::-1]:
                acc = acc * inv + a
            out[xs] += acc * inv
        near = sel[~far]
        if not len(near):
            return
        if not node["kids"]:
            Yl, Wl = self.Y[node["idx"]], self.W[node["idx"]]
            d = x[near, None] - Yl
            s = np.abs(d)
            with np.errstate(divide="ignore", invalid="ignore"):
                k = blob_factor(s, self.delta) / d
            out[near] += (Wl * np.where(s > 0, k, 0)).sum(axis=1)
            return
        for kid in node["kids"]:
            self._eval(kid, x, out, near)

    def velocity(self, x):
        x = np.asarray(x, dtype=complex)
        acc = np.zeros(len(x), dtype=complex)
        self._eval(self.root, x, acc, np.arange(len(x)))
        # i / conj(d) = i conj(1/d) with conj applied termwise
        return 1j * np.conj(acc) / TWO_PI


# ---------------------------------------------------------------------------
# the three explicit velocity laws
# ---------------------------------------------------------------------------

def _rule_for(f, quad, domain=None):
    holes = HoleSet.from_domain(domain) if domain is not None else None
    return SourceRule(f, holes, quad)


def own_cell(domain: PerforatedDomain, x):
    """Flat index of the obstacle whose closed cell ||x - z||_inf <= eps + eps^alpha holds x, else -1."""
    i, j = domain.nearest(x)
    inside = domain.cell_inf_distance(x, i, j) <= domain.eps + domain.params.gap
    return np.where(inside, (j - 1) * domain.n1 + (i - 1), -1)


def velocity_plane(f: VorticitySpec, x, quad: QuadratureSpec | None = None,
                   domain: PerforatedDomain | None = None, rule: SourceRule | None = None):
    """K[f](x), or K[f 1_{Omega^eps}](x) when a domain is given."""
    z = np.atleast_1d(as_complex(x)).astype(complex).ravel()
    if f.amplitude == 0:
        return np.zeros_like(z)
    rule = rule or _rule_for(f, quad, domain)
    own = own_cell(domain, z) if domain is not None else None
    Y, W = rule.nodes(z, own)
    return (W * point_kernel(z[:, None], Y)).sum(axis=1) / TWO_PI


def plane_evaluator(f, quad=None, domain=None) -> VelocityEvaluator:
    rule = _rule_for(f, quad, domain) if f.amplitude != 0 else None
    return VelocityEvaluator("plane", lambda z: velocity_plane(f, z, quad, domain, rule),
                             {"f": f, "domain": domain})


def image_point(y):
    """y* = y / |y|^2."""
    return 1.0 / np.conj(y)


def velocity_exterior_disk(f: VorticitySpec, x, quad: QuadratureSpec | None = None, rule=None):
    """Velocity outside the unit disk: tangent on |x| = 1, zero circulation, vanishing at infinity."""
    if abs(f.center) - f.radius < 1 - 1e-12:
        raise ValueError("vorticity support must lie outside the unit disk")
    z = np.atleast_1d(as_complex(x)).astype(complex).ravel()
    if np.any(np.abs(z) < 1 - 1e-12):
        raise ValueError("evaluation point inside the unit disk")
    if f.amplitude == 0:
        return np.zeros_like(z)
    rule = rule or SourceRule(f, None, quad)
    Y, W = rule.nodes(z)
    xa = z[:, None]
    k = point_kernel(xa, Y) - 1j / np.conj(xa - image_point(Y))
    return ((W * k).sum(axis=1) + W.sum(axis=1) * 1j / np.conj(z)) / TWO_PI


def exterior_obstacle_terms(zeta, eta, W, dT_conj):
    """conj(T') (Q - R) / 2 pi for the mapped image kernel, per evaluation point.

    zeta: (nx,), eta and W: (nx, k); dT_conj = conj(T'_ij(x)).
    """
    za = zeta[:, None]
    Q = (W * point_kernel(za, eta)).sum(axis=1)
    R = (W * (1j / np.conj(za - image_point(eta)) - 1j / np.conj(za))).sum(axis=1)
    return dT_conj * (Q - R) / TWO_PI


def velocity_exterior_obstacle(domain: PerforatedDomain, i: int, j: int, f: VorticitySpec, x,
                               quad: QuadratureSpec | None = None, tmap: ObstacleMap | None = None,
                               rule: SourceRule | None = None):
    """Velocity outside the single obstacle (i, j), built from the mapped image kernel."""
    domain.check_index(i, j)
    tmap = tmap or ObstacleMap(domain.shape)
    z = np.atleast_1d(as_complex(x)).astype(complex).ravel()
    z0, e = domain.center(i, j), domain.eps
    if np.any(tmap._strictly_inside((z - z0) / e)):
        raise ValueError("evaluation point inside the obstacle")
    if f.amplitude == 0:
        return np.zeros_like(z)
    if rule is None:
        hole = HoleSet.single(z0, e * domain.shape.p, e * domain.shape.q)
        rule = SourceRule(f, hole, quad)
    Y, W = rule.nodes(z, np.zeros(len(z), dtype=int))
    zeta = tmap.forward((z - z0) / e, check=False)
    eta = tmap.forward((Y - z0) / e, check=False)
    dT = tmap.derivative((z - z0) / e) / e
    return exterior_obstacle_terms(zeta, eta, W, np.conj(dT))


def exterior_obstacle_evaluator(domain, i, j, f, quad=None) -> VelocityEvaluator:
    tmap = ObstacleMap(domain.shape)
    e, z0 = domain.eps, domain.center(i, j)
    rule = SourceRule(f, HoleSet.single(z0, e * domain.shape.p, e * domain.shape.q), quad)
    return VelocityEvaluator(f"exterior_obstacle({i},{j})",
                             lambda z: velocity_exterior_obstacle(domain, i, j, f, z, quad, tmap, rule),
                             {"f": f, "domain": domain, "map": tmap})
