"""Compactly supported vorticity profiles and L^p norms over planar regions."""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from numpy.polynomial import Polynomial
from scipy import integrate

from .geometry import as_complex

KINDS = ("radial_bump", "gaussian_truncated", "patch_indicator_smooth")

# width of the Gaussian in units of the support radius
GAUSS_SIGMA = 0.5
# fraction of the support radius where the smoothed patch starts to fall off
PATCH_PLATEAU = 0.8

_SMOOTHSTEP = Polynomial([0, 0, 0, 10, -15, 6])


def smoothstep(t):
    """6t^5 - 15t^4 + 10t^3 clipped to [0, 1]."""
    t = np.clip(t, 0.0, 1.0)
    return t * t * t * (10 + t * (-15 + 6 * t))


class QuadratureError(RuntimeError):
    """Raised when a refinement comparison does not settle."""


@dataclass(frozen=True)
class VorticitySpec:
    """Radial profile ``amplitude * g(|x - center| / radius)`` with g(s) = 0 for s >= 1."""

    kind: str = "radial_bump"
    center: complex = 0j
    radius: float = 1.0
    amplitude: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown vorticity kind {self.kind!r}; expected one of {KINDS}")
        if self.radius <= 0:
            raise ValueError("support radius must be positive")
        object.__setattr__(self, "center", complex(self.center))

    @property
    def kinks(self) -> tuple[float, ...]:
        """Radii (in units of the support radius) where the profile is not smooth."""
        return (PATCH_PLATEAU,) if self.kind == "patch_indicator_smooth" else ()

    @property
    def panel_radii(self) -> tuple[float, ...]:
        """Radii where radial quadrature panels should break: kinks, plus extra breaks
        for the bump, whose flat approach to zero defeats a single Gauss panel."""
        if self.kind == "radial_bump":
            return (0.5, 0.75, 0.9)
        return self.kinks

    def profile(self, s):
        s = np.asarray(s, dtype=float)
        out = np.zeros_like(s)
        inside = s < 1.0
        si = s[inside]
        if self.kind == "radial_bump":
            out[inside] = np.exp(1.0 - 1.0 / (1.0 - si * si))
        elif self.kind == "gaussian_truncated":
            out[inside] = np.exp(-si * si / (2 * GAUSS_SIGMA**2))
        else:
            out[inside] = 1.0 - smoothstep((si - PATCH_PLATEAU) / (1 - PATCH_PLATEAU))
        return out

    def __call__(self, x):
        z = as_complex(x)
        return self.amplitude * self.profile(np.abs(z - self.center) / self.radius)

    def eval_scalar(self, x):
        return self(x)

    @cached_property
    def _unit_mass(self) -> float:
        """Integral of the profile over the unit disk."""
        if self.kind == "radial_bump":
            # substitute u = s^2
            val, _ = integrate.quad(lambda u: math.exp(1 - 1 / (1 - u)) if u < 1 else 0.0, 0, 1,
                                    epsabs=1e-14, epsrel=1e-12, limit=200)
            return math.pi * val
        if self.kind == "gaussian_truncated":
            s2 = GAUSS_SIGMA**2
            return 2 * math.pi * s2 * (1 - math.exp(-1 / (2 * s2)))
        w = 1 - PATCH_PLATEAU
        # s = PATCH_PLATEAU + w t on the fall-off, ds = w dt
        ramp = (Polynomial([1.0]) - _SMOOTHSTEP) * Polynomial([PATCH_PLATEAU, w]) * w
        anti = ramp.integ()
        return 2 * math.pi * (PATCH_PLATEAU**2 / 2 + anti(1.0) - anti(0.0))

    @property
    def total_mass(self) -> float:
        return self.amplitude * self.radius**2 * self._unit_mass

    @property
    def l1_norm(self) -> float:
        return abs(self.total_mass)

    @property
    def linf_norm(self) -> float:
        return abs(self.amplitude)

    def enclosed_mass(self, r) -> np.ndarray:
        """Mass inside the disk of radius r about the center (adaptive 1D quadrature)."""
        r = np.atleast_1d(np.asarray(r, dtype=float))
        out = np.empty_like(r)
        for k, rk in enumerate(r):
            top = min(rk, self.radius)
            if top <= 0:
                out[k] = 0.0
                continue
            val, _ = integrate.quad(lambda t: t * float(self.profile(np.array([t / self.radius]))[0]),
                                    0, top, epsabs=1e-15, epsrel=1e-13, limit=200)
            out[k] = 2 * math.pi * self.amplitude * val
        return out

    def radial_velocity(self, x) -> np.ndarray:
        """Exact full-plane velocity of a radial profile: (x-c)^perp m(|x-c|) / (2 pi |x-c|^2)."""
        z = as_complex(x) - self.center
        r = np.abs(z)
        m = self.enclosed_mass(r.ravel()).reshape(r.shape)
        with np.errstate(invalid="ignore", divide="ignore"):
            u = np.where(r > 0, 1j * z * m / (2 * math.pi * r**2), 0)
        return u

    def scaled(self, factor: float) -> "VorticitySpec":
        return VorticitySpec(self.kind, self.center, self.radius, self.amplitude * factor)


@dataclass(frozen=True)
class QuadratureSpec:
    """Resolution knobs shared by every integral.

    ``order`` is the Gauss-Legendre order per panel or cell; the source integrals
    use ``order`` angular nodes per panel and ``order`` radial nodes per segment.
    """

    scheme: str = "tensor_gauss"
    order: int = 16
    samples: int = 200_000
    singularity_handling: str = "polar_split"
    seed: int = 0

    def __post_init__(self):
        if self.scheme not in ("tensor_gauss", "montecarlo"):
            raise ValueError(f"unknown quadrature scheme {self.scheme!r}")
        if self.singularity_handling not in ("none", "polar_split"):
            raise ValueError(f"unknown singularity handling {self.singularity_handling!r}")
        if self.order < 2:
            raise ValueError("quadrature order must be at least 2")

    def refined(self) -> "QuadratureSpec":
        return QuadratureSpec(self.scheme, 2 * self.order, 2 * self.samples,
                              self.singularity_handling, self.seed)


@dataclass(frozen=True)
class NormResult:
    value: float
    err_estimate: float
    flagged: bool = False


def _apply_norm(vals, weights, p):
    vals = np.abs(vals)
    if vals.ndim > 1:  # vector fields: Euclidean magnitude per point
        vals = np.sqrt((vals**2).sum(axis=-1))
    if p == math.inf:
        return float(vals.max(initial=0.0))
    return float(np.sum(weights * vals**p) ** (1.0 / p))


def lp_norm(g, p, region, quad: QuadratureSpec | None = None, raise_on_flag: bool = False) -> NormResult:
    """L^p norm of a pointwise-evaluable field over ``region``.

    ``g`` maps a complex point array to scalars or complex vectors (treated as 2D vectors).
    ``region`` is anything from :mod:`euler_sieve.quadrature` exposing ``rule(quad)``.
    The error estimate compares the rule at ``quad`` with its refinement; p = inf
    is the max over quadrature nodes (a lower bound).
    """
    if p != math.inf and p < 1:
        raise ValueError("p must be >= 1 or inf")
    quad = quad or QuadratureSpec()

    def one(q):
        pts, w = region.rule(q)
        vals = np.asarray(g(pts))
        if np.iscomplexobj(vals):
            vals = np.stack([vals.real, vals.imag], axis=-1)
        return _apply_norm(vals, w, p)

    coarse = one(quad)
    fine = one(quad.refined())
    err = abs(fine - coarse)
    flagged = err > 0.1 * abs(fine) and err > 1e-14
    if flagged and raise_on_flag:
        raise QuadratureError(f"L^{p} norm did not converge: {coarse} vs {fine}")
    return NormResult(fine, err, flagged)
