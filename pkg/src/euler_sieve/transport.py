"""Vortex-blob particle method for vorticity transport around the obstacles.

Particles carry fixed vorticity values and fixed area weights; only positions
move, with RK4 steps under one of three velocity backends.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .biotsavart import TWO_PI, Treecode, own_cell, point_kernel, regularized_log, sum_kernel
from .conformal import ObstacleMap
from .corrector import CutoffFamily, kernel_sums
from .exterior_solver import MfsParams, _inner_curve, source_radius
from .field import VorticitySpec
from .geometry import PerforatedDomain
from .parallel import map_chunks


class TransportError(RuntimeError):
    """A particle entered an obstacle."""


class PlaneBackend:
    name = "plane"
    domain = None

    def __init__(self, delta: float, treecode: bool = False, theta: float = 0.5):
        self.delta, self.treecode, self.theta = delta, treecode, theta

    def velocity(self, x, Y, G):
        if self.treecode and len(Y) > 256:
            return Treecode(Y, G, self.theta, delta=self.delta).velocity(x)
        return sum_kernel(x, Y, G, self.delta) / TWO_PI


class CorrectorBackend:
    """The corrector of the particle vorticity, mollified in each obstacle's mapped plane."""

    name = "corrector"

    def __init__(self, domain: PerforatedDomain, delta: float, profile_kind: str = "quintic", chunk: int = 256):
        self.domain, self.delta, self.chunk = domain, delta, chunk
        self.tmap = ObstacleMap(domain.shape)
        self.cutoffs = CutoffFamily(domain, profile_kind)

    def velocity(self, x, Y, G):
        x = np.asarray(x, dtype=complex)

        def one(xc):
            ks = kernel_sums(self.domain, self.tmap, self.cutoffs, xc, Y, G, delta=self.delta)
            return ks.corrector()

        return map_chunks(one, x, self.chunk)


class MfsBackend:
    """Plane blob field plus a fundamental-solution correction re-solved at every evaluation.

    The collocation matrix depends only on the geometry, so its pseudo-inverse is
    formed once.
    """

    name = "mfs"

    def __init__(self, domain: PerforatedDomain, delta: float, params: MfsParams | None = None):
        self.domain, self.delta = domain, delta
        self.params = params = params or MfsParams()
        tmap = ObstacleMap(domain.shape)
        m, n_obs, e = params.m, domain.count, domain.eps
        t = 2 * np.pi * (np.arange(m) + 0.5) / m
        self.sources = domain.flat_centers[:, None] + e * _inner_curve(tmap, source_radius(tmap, params.rho), t)
        n_col = params.overdetermination * m
        tc = 2 * np.pi * np.arange(n_col) / n_col
        self.col = (domain.flat_centers[:, None] + e * domain.shape.boundary(tc)).ravel()
        G = np.log(np.abs(self.col[:, None] - self.sources.ravel()[None, :])).reshape(len(self.col), n_obs, m) / TWO_PI
        Gred = (G[:, :, 1:] - G[:, :, :1]).reshape(len(self.col), -1)
        C = np.zeros((len(self.col), n_obs))
        C[np.arange(len(self.col)), np.repeat(np.arange(n_obs), n_col)] = -1.0
        self.M = np.concatenate([Gred, C], axis=1)
        self.pinv = np.linalg.pinv(self.M, rcond=params.svd_cutoff)
        self.n_obs, self.m = n_obs, m
        self.plane = PlaneBackend(delta)

    def strengths(self, Y, G):
        psi = np.zeros(len(self.col))
        for a in range(0, len(self.col), 512):
            c = self.col[a:a + 512, None]
            psi[a:a + 512] = (G * regularized_log(np.abs(c - Y), self.delta)).sum(axis=1) / TWO_PI
        sol = self.pinv @ (-psi)
        b = sol[:-self.n_obs].reshape(self.n_obs, self.m - 1)
        return np.concatenate([-b.sum(axis=1, keepdims=True), b], axis=1)

    def velocity(self, x, Y, G):
        a = self.strengths(Y, G).ravel()
        S = self.sources.ravel()
        corr = sum_kernel(x, S, a) / TWO_PI
        return self.plane.velocity(x, Y, G) + corr


@dataclass(eq=False)
class VortexState:
    positions: np.ndarray
    values: np.ndarray
    weights: np.ndarray
    delta: float
    h: float
    backend: object = field(repr=False)
    t: float = 0.0
    tracers: np.ndarray | None = None

    @property
    def strengths(self) -> np.ndarray:
        return self.values * self.weights

    def velocity(self, x):
        return self.backend.velocity(x, self.positions, self.strengths)

    def copy(self) -> "VortexState":
        return replace(self, positions=self.positions.copy(),
                       tracers=None if self.tracers is None else self.tracers.copy())


def make_backend(kind: str, delta: float, domain: PerforatedDomain | None = None, **kw):
    if kind == "plane":
        return PlaneBackend(delta, **kw)
    if domain is None:
        raise ValueError(f"backend {kind!r} needs a domain")
    if kind == "corrector":
        return CorrectorBackend(domain, delta, **kw)
    if kind == "mfs":
        return MfsBackend(domain, delta, **kw)
    raise ValueError(f"unknown backend {kind!r}")


def initialize(f: VorticitySpec, h: float, backend="plane", domain: PerforatedDomain | None = None,
               blob_ratio: float = 2.0, tracers=None, **backend_kw) -> VortexState:
    """Particles on the grid c + h (k1, k2) inside supp f and outside the obstacles, weight h^2."""
    if h <= 0:
        raise ValueError("grid spacing must be positive")
    n = int(math.ceil(f.radius / h))
    k = np.arange(-n, n + 1)
    P = (f.center + h * (k[None, :] + 1j * k[:, None])).ravel()
    vals = f(P)
    keep = vals != 0
    if domain is not None:
        keep &= domain.contains(P)
    if not keep.any():
        raise ValueError("no particles: the vorticity vanishes on every grid node in the fluid")
    delta = blob_ratio * h
    if isinstance(backend, str):
        if backend == "plane":
            backend_kw.setdefault("treecode", False)
        backend = make_backend(backend, delta, domain, **backend_kw)
    tr = None if tracers is None else np.asarray(tracers, dtype=complex).copy()
    return VortexState(P[keep].copy(), vals[keep].copy(), np.full(int(keep.sum()), h * h), delta, h, backend, 0.0, tr)


def _check_inside(state: VortexState, pos):
    d = state.backend.domain
    if d is None:
        return
    bad = d.in_inclusion(pos)
    if bad.any():
        k = np.flatnonzero(bad)
        raise TransportError(f"{len(k)} particle(s) entered an obstacle at t={state.t:.6g}, "
                             f"first at {pos[k[0]]:.6f}")


def max_speed(state: VortexState) -> float:
    return float(np.abs(state.velocity(state.positions)).max(initial=0.0))


def stable_dt(state: VortexState, cfl: float = 0.5) -> float:
    """cfl * (particle spacing) / (max speed)."""
    umax = max_speed(state)
    return math.inf if umax == 0 else cfl * state.h / umax


def step(state: VortexState, dt: float) -> VortexState:
    """One RK4 step of every particle (and passive tracer) along the backend velocity."""
    Y0 = state.positions
    G = state.strengths
    n = len(Y0)
    pts0 = Y0 if state.tracers is None else np.concatenate([Y0, state.tracers])

    def rhs(pts):
        return state.backend.velocity(pts, pts[:n], G)

    k1 = rhs(pts0)
    k2 = rhs(pts0 + 0.5 * dt * k1)
    k3 = rhs(pts0 + 0.5 * dt * k2)
    k4 = rhs(pts0 + dt * k3)
    new = pts0 + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    _check_inside(state, new[:n])
    out = replace(state, positions=new[:n], t=state.t + dt,
                  tracers=None if state.tracers is None else new[n:])
    return out


def evolve(state: VortexState, t_end: float, dt: float, callback=None, stride: int = 1) -> VortexState:
    """Fixed-step integration to t_end (the last step is shortened to land on it)."""
    n_steps = max(1, int(math.ceil(abs(t_end - state.t) / abs(dt) - 1e-9)))
    h = (t_end - state.t) / n_steps
    if callback is not None:
        callback(0, state)
    for k in range(1, n_steps + 1):
        state = step(state, h)
        if callback is not None and (k % stride == 0 or k == n_steps):
            callback(k, state)
    return state


@dataclass
class Diagnostics:
    t: float
    l1: float
    l2: float
    linf: float
    mass: float
    circulations: np.ndarray
    radius: float


def diagnostics(state: VortexState, center: complex = 0j, n_contour: int = 720) -> Diagnostics:
    w, v = state.weights, state.values
    circ = np.zeros(0)
    d = state.backend.domain
    if d is not None:
        circ = np.empty(d.count)
        for k in range(d.count):
            i, j = d.index_of(k)
            z, nrm, ds = d.boundary_points(i, j, n_contour)
            u = state.velocity(z)
            circ[k] = float(np.sum((np.conj(1j * nrm) * u).real * ds))
    return Diagnostics(state.t, float(math.fsum(w * np.abs(v))), math.sqrt(math.fsum(w * v * v)),
                       float(np.abs(v).max()), float(math.fsum(w * v)), circ,
                       float(np.abs(state.positions - center).max()))


def write_trajectory_row(writer, state: VortexState) -> None:
    for pid, (p, val) in enumerate(zip(state.positions, state.values)):
        writer.writerow([f"{state.t:.10g}", pid, f"{p.real:.12e}", f"{p.imag:.12e}", f"{val:.12e}"])


def run(state: VortexState, t_end: float, dt: float, out_dir=None, stride: int = 10, center=0j):
    """Evolve with per-step diagnostics; optionally write trajectory.csv and diagnostics.csv."""
    rows = []
    traj = None
    fh_t = fh_d = None
    if out_dir is not None:
        import os

        fh_t = open(os.path.join(out_dir, "trajectory.csv"), "w", newline="", encoding="utf-8")
        fh_d = open(os.path.join(out_dir, "diagnostics.csv"), "w", newline="", encoding="utf-8")
        traj = csv.writer(fh_t, lineterminator="\n")
        traj.writerow(["t", "particle", "x", "y", "value"])
        dw = csv.writer(fh_d, lineterminator="\n")
        dw.writerow(["t", "l1", "l2", "linf", "mass", "max_abs_circulation", "radius"])

    n_steps = max(1, int(math.ceil(abs(t_end - state.t) / abs(dt) - 1e-9)))

    def cb(k, s):
        dg = diagnostics(s, center)
        rows.append(dg)
        if fh_d is not None:
            mc = float(np.abs(dg.circulations).max(initial=0.0))
            dw.writerow([f"{dg.t:.10g}", f"{dg.l1:.12e}", f"{dg.l2:.12e}", f"{dg.linf:.12e}",
                         f"{dg.mass:.12e}", f"{mc:.6e}", f"{dg.radius:.12e}"])
            if k % stride == 0 or k == n_steps:
                write_trajectory_row(traj, s)

    try:
        final = evolve(state, t_end, dt, cb, 1)
    finally:
        for fh in (fh_t, fh_d):
            if fh is not None:
                fh.close()
    return final, rows
