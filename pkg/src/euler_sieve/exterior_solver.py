"""Velocity around all obstacles from a stream-function solve with fundamental solutions.

The stream function is psi = psi_f + h with psi_f the log potential of f 1_{Omega^eps}
and h = sum_k a_k ln|x - s_k| / 2pi from sources s_k inside the obstacles.  On each
boundary psi equals an unknown constant; the strengths inside each obstacle sum to
zero, which removes the circulation around it and makes h decay at infinity.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .biotsavart import TWO_PI, VelocityEvaluator, own_cell, point_kernel
from .conformal import ObstacleMap
from .corrector import CorrectorModel
from .field import NormResult, QuadratureSpec, VorticitySpec
from .geometry import PerforatedDomain, as_complex
from .parallel import map_chunks
from .quadrature import CutoffSupportRegion, HoleSet, InclusionRegion, SourceRule


class MfsError(RuntimeError):
    """Raised when the collocation system is too large or too rank deficient."""


@dataclass(frozen=True)
class MfsParams:
    m: int = 64
    rho: float = 0.5
    tol_bc: float = 1e-8
    svd_cutoff: float = 1e-12
    max_unknowns: int = 40_000
    overdetermination: int = 2

    def __post_init__(self):
        if self.m < 4:
            raise ValueError("need at least 4 sources per obstacle")
        if not (0 < self.rho < 1):
            raise ValueError("rho must lie in (0, 1)")


def source_radius(tmap: ObstacleMap, rho: float) -> float:
    """Mapped radius of the source curve.

    Sources sit on the image under the inverse map of |zeta| = r.  For the disk
    r = rho; for an ellipse r is raised above the radius where that image
    collapses onto the focal segment.
    """
    if tmap.is_identity:
        return rho
    s = tmap.shape
    r_min = math.sqrt((s.p - s.q) / (s.p + s.q))
    return max(rho, 0.5 * (1 + r_min))


def _inner_curve(tmap: ObstacleMap, r: float, t):
    zeta = r * np.exp(1j * t)
    if tmap.is_identity:
        return zeta
    s = tmap.shape
    return 0.5 * ((s.p + s.q) * zeta + (s.p - s.q) / zeta)


@dataclass(eq=False)
class MfsSolution:
    domain: PerforatedDomain
    f: VorticitySpec
    params: MfsParams
    sources: np.ndarray          # (n_obstacles, m)
    strengths: np.ndarray        # (n_obstacles, m), rows sum to zero
    constants: np.ndarray        # boundary values of psi
    residual: float
    audit_residual: float
    condition: float
    rank: int
    flagged: bool
    plane: VelocityEvaluator = field(repr=False)
    rule: SourceRule | None = field(repr=False, default=None)

    # -- the harmonic correction h --------------------------------------
    def correction_gradient(self, x):
        """Complex gradient h_x + i h_y."""
        z = np.atleast_1d(as_complex(x)).astype(complex).ravel()
        S, A = self.sources.ravel(), self.strengths.ravel()

        def one(zc):
            return (A / np.conj(zc[:, None] - S)).sum(axis=1) / TWO_PI

        return map_chunks(one, z, 512)

    def correction_potential(self, x):
        z = np.atleast_1d(as_complex(x)).astype(complex).ravel()
        S, A = self.sources.ravel(), self.strengths.ravel()

        def one(zc):
            return (A * np.log(np.abs(zc[:, None] - S))).sum(axis=1) / TWO_PI

        return map_chunks(one, z, 512)

    def velocity(self, x):
        """u = K[f 1_Omega] + perp grad h, zero inside the obstacles."""
        z = np.atleast_1d(as_complex(x)).astype(complex).ravel()
        u = self.plane(z) + 1j * self.correction_gradient(z)
        inside = self.domain.in_inclusion(z) & ~_on_boundary(self.domain, z)
        return np.where(inside, 0, u)

    def evaluator(self) -> VelocityEvaluator:
        return VelocityEvaluator("mfs_solution", self.velocity, {"f": self.f, "domain": self.domain})

    def correction_energy(self, n_boundary: int | None = None) -> float:
        """Integral of |grad h|^2 over Omega^eps as a sum of boundary integrals of h dh/dn."""
        d = self.domain
        n = n_boundary or 8 * self.params.m
        total = 0.0
        for k in range(d.count):
            i, j = d.index_of(k)
            z, nrm, ds = d.boundary_points(i, j, n)
            h = self.correction_potential(z)
            dh = (np.conj(nrm) * self.correction_gradient(z)).real
            total -= float(np.sum(h * dh * ds))
        return total

    def circulations(self, n: int = 360) -> np.ndarray:
        d = self.domain
        out = np.empty(d.count)
        for k in range(d.count):
            i, j = d.index_of(k)
            z, nrm, ds = d.boundary_points(i, j, n)
            u = self.velocity(z)
            out[k] = float(np.sum((np.conj(1j * nrm) * u).real * ds))
        return out

    def normal_audit(self, n: int = 360) -> float:
        d = self.domain
        worst = 0.0
        for k in range(d.count):
            i, j = d.index_of(k)
            z, nrm, _ = d.boundary_points(i, j, n)
            worst = max(worst, float(np.abs((np.conj(nrm) * self.velocity(z)).real).max()))
        return worst


def _on_boundary(domain, z):
    i, j = domain.nearest(z)
    loc = domain.local(z, i, j)
    s = domain.shape
    return np.abs((loc.real / s.p) ** 2 + (loc.imag / s.q) ** 2 - 1) < 1e-9


def _plane_parts(rule, domain, z):
    """(log potential / 2pi, velocity) of f 1_Omega at boundary or field points."""
    def one(zc):
        own = own_cell(domain, zc)
        Y, W = rule.nodes(zc, own)
        d = zc[:, None] - Y
        with np.errstate(divide="ignore"):
            logs = np.where(W != 0, np.log(np.abs(d)), 0.0)
        return (W * logs).sum(axis=1) / TWO_PI, (W * point_kernel(zc[:, None], Y)).sum(axis=1) / TWO_PI

    return map_chunks(one, z, 64)


def solve_exterior(domain: PerforatedDomain, f: VorticitySpec, params: MfsParams | None = None,
                   quad: QuadratureSpec | None = None, csv_path=None) -> MfsSolution:
    params = params or MfsParams()
    quad = quad or QuadratureSpec()
    n_obs, m = domain.count, params.m
    if n_obs * m > params.max_unknowns:
        raise MfsError(f"{n_obs * m} unknowns exceed the cap of {params.max_unknowns}")
    tmap = ObstacleMap(domain.shape)
    e = domain.eps
    t_src = 2 * np.pi * (np.arange(m) + 0.5) / m
    r_src = source_radius(tmap, params.rho)
    sources = domain.flat_centers[:, None] + e * _inner_curve(tmap, r_src, t_src)[None, :]
    n_col = params.overdetermination * m
    t_col = 2 * np.pi * np.arange(n_col) / n_col
    col = domain.flat_centers[:, None] + e * domain.shape.boundary(t_col)[None, :]
    rule = SourceRule(f, HoleSet.from_domain(domain), quad) if f.amplitude != 0 else None

    def plane_velocity(z):
        z = np.atleast_1d(z)
        if rule is None:
            return np.zeros(z.shape, complex)
        return _plane_parts(rule, domain, z)[1]

    plane = VelocityEvaluator("plane", plane_velocity, {"f": f, "domain": domain})
    if rule is None:
        zeros = np.zeros((n_obs, m))
        return MfsSolution(domain, f, params, sources, zeros, np.zeros(n_obs), 0.0, 0.0, 1.0, 0, False, plane)
    psi_f = _plane_parts(rule, domain, col.ravel())[0]
    # unknowns per obstacle: strengths b_1..b_{m-1} (a_0 = -sum b) and the boundary constant
    X = col.ravel()[:, None]
    G = np.log(np.abs(X - sources.ravel()[None, :])) / TWO_PI  # (rows, n_obs*m)
    G = G.reshape(len(X), n_obs, m)
    Gred = G[:, :, 1:] - G[:, :, :1]
    owner = np.repeat(np.arange(n_obs), n_col)
    Cmat = np.zeros((len(X), n_obs))
    Cmat[np.arange(len(X)), owner] = -1.0
    M = np.concatenate([Gred.reshape(len(X), -1), Cmat], axis=1)
    # scale the constant columns like the kernel columns
    scale = np.ones(M.shape[1])
    scale[-n_obs:] = np.linalg.norm(Gred.reshape(len(X), -1), axis=0).mean() / math.sqrt(n_col)
    sol, _, rank, sv = np.linalg.lstsq(M * scale, -psi_f, rcond=params.svd_cutoff)
    sol = sol * scale
    if rank < 0.25 * M.shape[1]:
        raise MfsError(f"collocation matrix rank {rank} of {M.shape[1]} columns; "
                       f"singular values span {sv[0]:.3e}..{sv[-1]:.3e}")
    b = sol[:-n_obs].reshape(n_obs, m - 1)
    strengths = np.concatenate([-b.sum(axis=1, keepdims=True), b], axis=1)
    consts = sol[-n_obs:]
    residual = float(np.abs(M @ sol + psi_f).max())
    # audit on points between the collocation nodes
    t_aud = t_col + np.pi / n_col
    aud = domain.flat_centers[:, None] + e * domain.shape.boundary(t_aud)[None, :]
    psi_aud = _plane_parts(rule, domain, aud.ravel())[0]
    h_aud = (strengths.ravel()[None, :] * np.log(np.abs(aud.ravel()[:, None] - sources.ravel()[None, :]))).sum(axis=1) / TWO_PI
    audit = float(np.abs(psi_aud + h_aud - np.repeat(consts, n_col)).max())
    cond = float(sv[0] / sv[rank - 1]) if rank else math.inf
    flagged = max(residual, audit) > params.tol_bc
    out = MfsSolution(domain, f, params, sources, strengths, consts, residual, audit, cond, int(rank),
                      flagged, plane, rule)
    if csv_path is not None:
        write_mfs_report(csv_path, out)
    return out


def write_mfs_report(path, sol: MfsSolution) -> None:
    d = sol.domain
    with open(path, "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["eps", "alpha", "mu", "shape", "obstacles", "m", "rho", "residual", "audit_residual",
                     "condition", "rank", "max_normal_velocity", "max_abs_circulation", "flagged"])
        wr.writerow([repr(d.eps), repr(d.params.alpha), repr(d.params.mu), d.shape.kind, d.count,
                     sol.params.m, repr(sol.params.rho), f"{sol.residual:.6e}", f"{sol.audit_residual:.6e}",
                     f"{sol.condition:.6e}", sol.rank, f"{sol.normal_audit():.6e}",
                     f"{np.abs(sol.circulations()).max():.6e}", int(sol.flagged)])


@dataclass
class LerayReport:
    r_norm: float
    w_norm: float
    r_err: float
    w_err: float
    ratio: float
    holds: bool
    static_norm: float
    curl_mismatch: float
    flagged: bool


def leray_check(domain: PerforatedDomain, f: VorticitySpec, quad: QuadratureSpec | None = None,
                params: MfsParams | None = None, slack: float = 0.02,
                solution: MfsSolution | None = None, curl_grid: int = 6) -> LerayReport:
    """Compare r = u - v with w = K[f 1_Omega] - v in L^2(Omega^eps).

    r = w + perp grad h, and both w and the cut-off gradients vanish outside
    the cut-off supports, so
        |r|^2 = int_supp |w + perp grad h|^2 + (int_Omega |grad h|^2 - int_supp |grad h|^2),
    with the full-domain Dirichlet integral of h taken from boundary data.
    """
    quad = quad or QuadratureSpec()
    sol = solution or solve_exterior(domain, f, params, quad)
    model = CorrectorModel(domain, f, quad)
    region = CutoffSupportRegion(domain)
    energy = sol.correction_energy()
    vals = []
    for q in (quad, quad.refined()):
        pts, wts = region.rule(q)
        w = model.fields(pts)["w"]
        gh = sol.correction_gradient(pts)
        r2 = float(np.sum(wts * np.abs(w + 1j * gh) ** 2)) + energy - float(np.sum(wts * np.abs(gh) ** 2))
        w2 = float(np.sum(wts * np.abs(w) ** 2))
        vals.append((math.sqrt(max(r2, 0.0)), math.sqrt(w2)))
    (r0, w0), (r1, w1) = vals
    r_err, w_err = abs(r1 - r0), abs(w1 - w0)
    flagged = sol.flagged or r_err > 0.1 * r1 or w_err > 0.1 * w1
    # static quantity: u - K[f 1_Omega] = perp grad h in Omega, -K[f 1_Omega] inside the obstacles
    pts, wts = InclusionRegion(domain).rule(quad)
    k_in = sol.plane(pts)
    static = math.sqrt(max(energy, 0.0) + float(np.sum(wts * np.abs(k_in) ** 2)))
    mismatch = curl_audit(domain, lambda z: sol.velocity(z) - model.fields(z)["corrector"],
                          lambda z: model.fields(z)["w"], curl_grid)
    return LerayReport(r1, w1, r_err, w_err, r1 / w1 if w1 > 0 else math.inf,
                       r1 <= (1 + slack) * w1, static, mismatch, bool(flagged))


def curl_audit(domain, field_a, field_b, n: int = 6, h: float = 1e-5) -> float:
    """max |curl a - curl b| over a grid of points in the fluid part of the obstacle rectangle."""
    x0, x1, y0, y1 = domain.rect
    gx, gy = np.meshgrid(np.linspace(x0, x1, n + 2)[1:-1], np.linspace(y0, y1, n + 2)[1:-1])
    pts = (gx + 1j * gy).ravel()
    i, j = domain.nearest(pts)
    keep = np.abs(domain.local(pts, i, j)) > 1.5  # stay clear of the boundaries
    pts = pts[keep]
    if not len(pts):
        return 0.0

    def curl(fn):
        ux = (fn(pts + h) - fn(pts - h)) / (2 * h)
        uy = (fn(pts + 1j * h) - fn(pts - 1j * h)) / (2 * h)
        return ux.imag - uy.real

    return float(np.abs(curl(field_a) - curl(field_b)).max())


def static_convergence(domain: PerforatedDomain, f: VorticitySpec, quad=None, params=None) -> float:
    """||u - K[f 1_Omega]||_{L^2(R^2)} with u extended by zero inside the obstacles."""
    quad = quad or QuadratureSpec()
    sol = solve_exterior(domain, f, params, quad)
    pts, wts = InclusionRegion(domain).rule(quad)
    return math.sqrt(max(sol.correction_energy(), 0.0) + float(np.sum(wts * np.abs(sol.plane(pts)) ** 2)))
