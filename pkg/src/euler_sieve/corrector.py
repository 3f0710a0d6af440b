"""Cut-off functions around each obstacle, the glued corrector field and its error terms.

For a point x in the cut-off support of obstacle (i, j) write zeta = T_ij(x) and
eta = T_ij(y) for the sources y.  With weights F = f(y) dy the kernel sums are

    P  = sum F i / conj(x - y)                       (plane kernel)
    Lp = sum F ln|x - y|
    A  = sum F ln(beta |x - y| / (eps |zeta - eta|))
    Bp = sum F ln(|zeta - eta*| / |zeta|)
    Q  = sum F i / conj(zeta - eta)
    R  = sum F i (1 / conj(zeta - eta*) - 1 / conj(zeta))
    E  = sum F ln(eps |zeta - eta| |zeta| / (beta |zeta - eta*|))

and, with phi the cut-off and i grad(phi) its perpendicular gradient,

    w1 = i grad(phi) A / 2pi          w2 = i grad(phi) Bp / 2pi
    w3 = phi (P - conj(T') Q) / 2pi   w4 = phi conj(T') R / 2pi
    v  = ((1 - phi) P - i grad(phi) (Lp - E) + phi conj(T') (Q - R)) / 2pi.

v is assembled from Lp and E, the error terms from A and Bp, so the identity
K - v = w1 + w2 + w3 + w4 is a genuine numerical check.
"""
from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass

import numpy as np

from .biotsavart import (TWO_PI, VelocityEvaluator, blob_factor, image_point, own_cell,
                         point_kernel, regularized_log)
from .conformal import ObstacleMap
from .field import NormResult, QuadratureSpec, VorticitySpec
from .geometry import PerforatedDomain, as_complex
from .parallel import map_chunks
from .quadrature import CutoffSupportRegion, HoleSet, InclusionRegion, SourceRule

PROFILES = ("quintic", "cubic", "smooth")


def _smooth_step(t):
    """C-infinity transition from 0 (t <= 0) to 1 (t >= 1)."""
    t = np.clip(t, 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(t > 0, np.exp(-1.0 / np.where(t > 0, t, 1)), 0.0)
        b = np.where(t < 1, np.exp(-1.0 / np.where(t < 1, 1 - t, 1)), 0.0)
    return a / (a + b)


def _smooth_step_deriv(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    m = (t > 0) & (t < 1)
    tm = t[m]
    a = np.exp(-1 / tm)
    b = np.exp(-1 / (1 - tm))
    da = a / tm**2
    db = -b / (1 - tm) ** 2
    out[m] = (da * (a + b) - a * (da + db)) / (a + b) ** 2
    return out


def profile(s, kind: str = "quintic"):
    """Non-increasing profile equal to 1 on s <= 1/2 and 0 on s >= 1, with its derivative."""
    s = np.asarray(s, dtype=float)
    t = np.clip(2 * s - 1, 0.0, 1.0)
    inner = (s > 0.5) & (s < 1.0)
    if kind == "quintic":
        val = 1 - t**3 * (10 + t * (-15 + 6 * t))
        der = -2 * 30 * t**2 * (1 - t) ** 2
    elif kind == "cubic":
        val = 1 - t * t * (3 - 2 * t)
        der = -2 * 6 * t * (1 - t)
    elif kind == "smooth":
        val = 1 - _smooth_step(t)
        der = -2 * _smooth_step_deriv(t)
    else:
        raise ValueError(f"unknown cut-off profile {kind!r}; expected one of {PROFILES}")
    return val, np.where(inner, der, 0.0)


def profile_slope_bound(kind: str = "quintic") -> float:
    """sup |profile'|."""
    if kind == "quintic":
        return 3.75
    if kind == "cubic":
        return 3.0
    s = np.linspace(0.5, 1.0, 200001)
    return float(np.abs(profile(s, kind)[1]).max())


@dataclass(frozen=True, eq=False)
class CutoffFamily:
    domain: PerforatedDomain
    kind: str = "quintic"

    def __post_init__(self):
        if self.kind not in PROFILES:
            raise ValueError(f"unknown cut-off profile {self.kind!r}; expected one of {PROFILES}")

    @property
    def inner(self) -> float:
        """Half-width of the plateau where the cut-off equals 1."""
        return self.domain.eps + self.domain.params.gap / 2

    @property
    def outer(self) -> float:
        return self.domain.eps + self.domain.params.gap

    def single(self, i, j, x):
        """(value, complex gradient) of the cut-off of obstacle (i, j)."""
        d = as_complex(x) - self.domain.centers[np.asarray(j) - 1, np.asarray(i) - 1]
        return self._eval(d)

    def _eval(self, d):
        e, g = self.domain.eps, self.domain.params.gap
        ax, ay = np.abs(d.real), np.abs(d.imag)
        norm = np.maximum(ax, ay)
        val, der = profile((norm - e) / g, self.kind)
        # gradient of the inf-norm; ties resolved towards the first coordinate
        xdom = ax >= ay
        grad = np.where(xdom, np.sign(d.real) + 0j, 1j * np.sign(d.imag))
        return val, der / g * grad

    def __call__(self, x):
        """(sum of cut-offs, gradient of the sum, owning obstacle index or -1)."""
        z = as_complex(x)
        own = own_cell(self.domain, z)
        i, j = self.domain.nearest(z)
        val, grad = self._eval(z - self.domain.centers[j - 1, i - 1])
        val = np.where(own >= 0, val, 0.0)
        grad = np.where(own >= 0, grad, 0j)
        return val, grad, own


def cutoff(domain: PerforatedDomain, i: int, j: int, x, kind: str = "quintic"):
    """Value and gradient (as an (..., 2) array) of the cut-off of obstacle (i, j)."""
    domain.check_index(i, j)
    val, grad = CutoffFamily(domain, kind).single(i, j, x)
    return val, np.stack([grad.real, grad.imag], axis=-1)


def gradient_support_measure(eps: float, alpha: float) -> float:
    """Area of {eps + eps^alpha / 2 <= ||x - z||_inf <= eps + eps^alpha}."""
    g = eps**alpha
    return 4 * eps ** (alpha + 1) + 3 * g * g


def cutoff_support_measure(eps: float, alpha: float) -> float:
    return 4 * (eps + eps**alpha) ** 2


def measured_gradient_support(domain: PerforatedDomain, kind: str = "quintic", order: int = 8) -> float:
    """Area where the cut-off gradient is nonzero, from Gauss nodes on a plateau-aligned grid."""
    fam = CutoffFamily(domain, kind)
    a, b = fam.inner, fam.outer
    edges = np.array([-b, -a, a, b])
    s, w = np.polynomial.legendre.leggauss(order)
    s, w = 0.5 * (s + 1), 0.5 * w
    L = np.diff(edges)
    px = (edges[:-1, None] + L[:, None] * s).ravel()
    wx = (L[:, None] * w).ravel()
    P = px[None, :] + 1j * px[:, None]
    Wt = wx[None, :] * wx[:, None]
    i, j = 1, 1
    _, grad = fam.single(i, j, domain.center(i, j) + P)
    return float(math.fsum(Wt[np.abs(grad) > 0]))


# ---------------------------------------------------------------------------
# kernel sums
# ---------------------------------------------------------------------------

def image_circulation_weight(eta, delta_zeta, n: int = 1024):
    """Coefficient of ln|zeta| that keeps a mollified source at eta circulation-free on |zeta| = 1.

    It is the circle average of the Poisson kernel times the blob factor, which
    is smooth on the scale of the blob even for sources close to the circle.
    Equals 1 without mollification or far from the circle.
    """
    eta = np.asarray(eta, dtype=complex)
    out = np.ones(eta.shape)
    if delta_zeta == 0:
        return out
    near = np.abs(eta) - 1 < 7 * delta_zeta
    if near.any():
        t = TWO_PI * (np.arange(n) + 0.5) / n
        en = eta[near][..., None]
        s = np.abs(np.exp(1j * t) - en)
        out[near] = np.mean((np.abs(en) ** 2 - 1) * blob_factor(s, delta_zeta) / s**2, axis=-1)
    return out


@dataclass
class KernelSums:
    P: np.ndarray
    Lp: np.ndarray
    A: np.ndarray
    Bp: np.ndarray
    Q: np.ndarray
    R: np.ndarray
    E: np.ndarray
    phi: np.ndarray
    grad: np.ndarray
    dTc: np.ndarray
    own: np.ndarray

    def plane(self):
        return self.P / TWO_PI

    def terms(self):
        ig = 1j * self.grad
        return (ig * self.A / TWO_PI, ig * self.Bp / TWO_PI,
                self.phi * (self.P - self.dTc * self.Q) / TWO_PI,
                self.phi * self.dTc * self.R / TWO_PI)

    def corrector(self):
        return ((1 - self.phi) * self.P - 1j * self.grad * (self.Lp - self.E)
                + self.phi * self.dTc * (self.Q - self.R)) / TWO_PI


def kernel_sums(domain, tmap: ObstacleMap, cutoffs: CutoffFamily, x, Y, W, own=None, delta: float = 0.0):
    """All kernel sums at points x for sources (Y, W) of shape (nx, k) or (k,)."""
    x = np.asarray(x, dtype=complex)
    nx = len(x)
    Y = np.broadcast_to(Y, (nx,) + np.shape(Y)[-1:])
    W = np.broadcast_to(W, Y.shape)
    phi, grad, own_c = cutoffs(x)
    own = own_c if own is None else own
    xa = x[:, None]
    d = xa - Y
    s = np.abs(d)
    P = (W * point_kernel(xa, Y, delta)).sum(axis=1)
    zero = np.zeros(nx)
    out = KernelSums(P, zero.copy(), zero.copy(), zero.copy(), np.zeros(nx, complex), np.zeros(nx, complex),
                     zero.copy(), phi, grad, np.zeros(nx, complex), own)
    act = own >= 0
    # the plane log sum is only needed where the cut-off gradient is nonzero
    lp_rows = np.flatnonzero(act)
    if len(lp_rows):
        out.Lp[lp_rows] = (W[lp_rows] * regularized_log(s[lp_rows], delta)).sum(axis=1)
    if not act.any():
        return out
    rows = np.flatnonzero(act)
    e, beta = domain.eps, tmap.beta
    centers = domain.flat_centers[own[rows]]
    X = (x[rows] - centers) / e
    zeta = tmap.forward(X, check=False)
    eta = tmap.forward((Y[rows] - centers[:, None]) / e, check=False)
    Wr = W[rows]
    dz = zeta[:, None] - eta
    sz = np.abs(dz)
    star = image_point(eta)
    ds = zeta[:, None] - star
    sstar = np.abs(ds)
    abs_zeta = np.abs(zeta)
    dTc = np.conj(tmap.derivative(X) / e)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(sz > 0, (beta * s[rows]) / (e * sz), beta / np.abs(e * dTc)[:, None])
        A = (Wr * np.log(ratio)).sum(axis=1)
        Bp = (Wr * np.log(sstar / abs_zeta[:, None])).sum(axis=1)
    if delta == 0:
        Q = (Wr * point_kernel(zeta[:, None], eta)).sum(axis=1)
        R = (Wr * (1j / np.conj(ds) - 1j / np.conj(zeta)[:, None])).sum(axis=1)
        with np.errstate(divide="ignore"):
            E = (Wr * np.log(np.where(sz > 0, e * sz * abs_zeta[:, None] / (beta * sstar), 1.0))).sum(axis=1)
    else:
        # mollify in the mapped plane; the image blob sits at eta* with matching width
        dzeta = delta * beta / e
        if Y.ndim != 2 or not np.shares_memory(Y[:1], Y[-1:]):
            kappa = image_circulation_weight(eta, dzeta)
        else:  # shared sources: one weight per (obstacle, source)
            kappa = np.empty(eta.shape)
            for o in np.unique(own[rows]):
                sel = np.flatnonzero(own[rows] == o)
                kappa[sel] = image_circulation_weight(eta[sel[0]], dzeta)[None, :]
        aeta = np.abs(eta)
        Q = (Wr * point_kernel(zeta[:, None], eta, dzeta)).sum(axis=1)
        R = (Wr * 1j * (blob_factor(aeta * sstar, dzeta) / np.conj(ds)
                        - kappa / np.conj(zeta)[:, None])).sum(axis=1)
        node = (regularized_log(sz, dzeta) - regularized_log(aeta * sstar, dzeta) + np.log(aeta)
                + kappa * np.log(abs_zeta)[:, None] + math.log(e / beta))
        E = (Wr * node).sum(axis=1)
    out.A[rows], out.Bp[rows], out.Q[rows], out.R[rows], out.E[rows] = A, Bp, Q, R, E
    out.dTc[rows] = dTc
    return out


class CorrectorModel:
    """Evaluates the plane field of f 1_{Omega^eps}, the corrector and the error terms."""

    def __init__(self, domain: PerforatedDomain, f: VorticitySpec, quad: QuadratureSpec | None = None,
                 profile_kind: str = "quintic", chunk: int = 64):
        self.domain, self.f = domain, f
        self.quad = quad or QuadratureSpec()
        self.tmap = ObstacleMap(domain.shape)
        self.cutoffs = CutoffFamily(domain, profile_kind)
        self.rule = SourceRule(f, HoleSet.from_domain(domain), self.quad)
        self.chunk = chunk

    def sums(self, x) -> KernelSums:
        z = np.atleast_1d(as_complex(x)).astype(complex).ravel()

        def one(zc):
            own = own_cell(self.domain, zc)
            Y, W = self.rule.nodes(zc, own)
            ks = kernel_sums(self.domain, self.tmap, self.cutoffs, zc, Y, W, own)
            return (ks.P, ks.Lp, ks.A, ks.Bp, ks.Q, ks.R, ks.E, ks.phi, ks.grad, ks.dTc, ks.own)

        return KernelSums(*map_chunks(one, z, self.chunk))

    def fields(self, x) -> dict:
        """plane, corrector, w1..w4 and their sum at x (zero-extended inside obstacles)."""
        z = np.atleast_1d(as_complex(x)).astype(complex).ravel()
        ks = self.sums(z)
        inside = self.domain.in_inclusion(z) & ~self._on_boundary(z)
        out = {"plane": ks.plane(), "corrector": ks.corrector()}
        for k, w in enumerate(ks.terms(), 1):
            out[f"w{k}"] = w
        out["w"] = out["plane"] - out["corrector"]
        for key in ("corrector", "w1", "w2", "w3", "w4"):
            out[key] = np.where(inside, 0, out[key])
        out["w"] = np.where(inside, out["plane"], out["w"])
        return out

    def _on_boundary(self, z):
        i, j = self.domain.nearest(z)
        loc = self.domain.local(z, i, j)
        s = self.domain.shape
        return np.abs((loc.real / s.p) ** 2 + (loc.imag / s.q) ** 2 - 1) < 1e-9

    def corrector(self, x):
        return self.fields(x)["corrector"]

    def evaluator(self, which: str = "corrector") -> VelocityEvaluator:
        tag = "corrector" if which == "corrector" else which
        if which.startswith("w") and which != "w":
            tag = f"error_term({which[1:]})"
        return VelocityEvaluator(tag, lambda z: self.fields(z)[which], {"f": self.f, "domain": self.domain})


def log_ratio_scale(model: CorrectorModel, n: int = 16) -> tuple[float, float]:
    """sup |A| over the cut-off gradient annuli and its ratio to M0 eps |ln eps|.

    A(x) is the integral of ln(beta |x - y| / (eps |T x - T y|)) f(y) over the fluid,
    M0 = max(||f||_1, ||f||_inf).  Sampled on n x n points per annulus side.
    """
    d, fam = model.domain, model.cutoffs
    a, b = fam.inner, fam.outer
    t = np.linspace(-b, b, 4 * n)
    r = np.linspace(a, b, n)
    ring = np.concatenate([t[:, None] + 1j * sgn * r[None, :] for sgn in (1, -1)]
                          + [sgn * r[None, :] + 1j * t[:, None] for sgn in (1, -1)], axis=None)
    near = np.abs(d.flat_centers - model.f.center) < model.f.radius + b * math.sqrt(2)
    pts = (d.flat_centers[near][:, None] + ring[None, :]).ravel()
    A = model.sums(pts).A if len(pts) else np.zeros(1)
    sup = float(np.max(np.abs(A)))
    m0 = max(model.f.l1_norm, model.f.linf_norm)
    return sup, sup / (m0 * d.eps * abs(math.log(d.eps)))


def corrector_velocity(domain, f, x, quad=None, profile_kind="quintic"):
    return CorrectorModel(domain, f, quad, profile_kind).corrector(x)


def error_term(k: int, domain, f, x, quad=None, profile_kind="quintic"):
    if k not in (1, 2, 3, 4):
        raise ValueError("error term index must be 1, 2, 3 or 4")
    return CorrectorModel(domain, f, quad, profile_kind).fields(x)[f"w{k}"]


# ---------------------------------------------------------------------------
# norms
# ---------------------------------------------------------------------------

REPORT_COLUMNS = ["eps", "alpha", "mu", "shape", "w1", "w2", "w3", "w4", "w", "w_incl",
                  "err_w1", "err_w2", "err_w3", "err_w4", "err_w", "err_w_incl", "flagged"]


@dataclass
class CorrectorReport:
    eps: float
    alpha: float
    mu: float
    shape: str
    norms: dict
    errors: dict
    flagged: bool

    @property
    def total(self) -> float:
        """L^2 norm over the whole plane with zero extension inside the obstacles."""
        return math.hypot(self.norms["w"], self.norms["w_incl"])

    def row(self) -> list:
        keys = ["w1", "w2", "w3", "w4", "w", "w_incl"]
        return ([repr(self.eps), repr(self.alpha), repr(self.mu), self.shape]
                + [f"{self.norms[k]:.12e}" for k in keys] + [f"{self.errors[k]:.3e}" for k in keys]
                + [int(self.flagged)])


def _l2_two_levels(eval_fn, region, quad, keys):
    vals = []
    for q in (quad, quad.refined()):
        pts, w = region.rule(q)
        fld = eval_fn(pts)
        vals.append({k: math.sqrt(float(np.sum(w * np.abs(fld[k]) ** 2))) for k in keys})
    out = {}
    for k in keys:
        c, fnorm = vals[0][k], vals[1][k]
        err = abs(fnorm - c)
        out[k] = NormResult(fnorm, err, bool(err > 0.1 * fnorm and err > 1e-14))
    return out


def corrector_report(domain: PerforatedDomain, f: VorticitySpec, quad: QuadratureSpec | None = None,
                     profile_kind: str = "quintic", csv_path=None) -> CorrectorReport:
    """L^2 norms of w1..w4 and w over Omega^eps, and of w over the obstacles.

    Every error term carries the cut-off or its gradient, so the Omega^eps norms
    are integrals over the cut-off supports minus the obstacles.  Inside the
    obstacles the zero-extended corrector leaves w equal to the plane field.
    """
    quad = quad or QuadratureSpec()
    model = CorrectorModel(domain, f, quad, profile_kind)
    keys = ["w1", "w2", "w3", "w4", "w"]
    res = _l2_two_levels(model.fields, CutoffSupportRegion(domain), quad, keys)

    def plane_only(pts):
        own = own_cell(domain, pts)
        Y, W = model.rule.nodes(pts, own)
        return {"w_incl": (W * point_kernel(pts[:, None], Y)).sum(axis=1) / TWO_PI}

    res.update(_l2_two_levels(lambda p: {"w_incl": map_chunks(lambda c: plane_only(c)["w_incl"], p, 64)},
                              InclusionRegion(domain), quad, ["w_incl"]))
    rep = CorrectorReport(domain.eps, domain.params.alpha, domain.params.mu, domain.shape.kind,
                          {k: r.value for k, r in res.items()}, {k: r.err_estimate for k, r in res.items()},
                          any(r.flagged for r in res.values()))
    if csv_path is not None:
        append_report(csv_path, rep)
    return rep


def append_report(path, rep: CorrectorReport) -> None:
    new = not os.path.exists(path)
    with open(path, "a", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        if new:
            wr.writerow(REPORT_COLUMNS)
        wr.writerow(rep.row())
