"""Sweeps over eps: decay-rate fits for the error field and dynamic convergence runs."""
from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .corrector import CorrectorReport, corrector_report
from .field import QuadratureSpec, VorticitySpec
from .geometry import LatticeParams, ObstacleShape, build_domain
from .quadrature import WindowRegion
from .transport import evolve, initialize

SLOPE_SLACK = 0.15
STABILITY_TOL = 0.05


def predicted_slope(alpha: float, mu: float) -> float:
    """Exponent (2 - alpha - mu) / 2 of the proven upper bound."""
    return (2 - alpha - mu) / 2


def fit_slope(eps, norms, log_corrected: bool = False) -> float:
    """Least-squares slope of ln(norm) (optionally ln(norm / |ln eps|)) against ln(eps)."""
    le = np.log(np.asarray(eps, dtype=float))
    ln = np.log(np.asarray(norms, dtype=float))
    if log_corrected:
        ln = ln - np.log(np.abs(le))
    return float(np.polyfit(le, ln, 1)[0])


def small_scale_profile(eps, alpha):
    """eps^(1/2) + |ln eps|^(1/2) eps^(1 - alpha), the shape of the bounds on w3 and w4 for mu = 1."""
    eps = np.asarray(eps, dtype=float)
    return np.sqrt(eps) + np.sqrt(np.abs(np.log(eps))) * eps ** (1 - alpha)


@dataclass
class RateReport:
    alpha: float
    mu: float
    shape: str
    sweep: list = field(repr=False)
    fitted_slope: float = math.nan
    log_corrected_slope: float = math.nan
    slope_used: float = math.nan
    slope_without_largest: float = math.nan
    predicted_slope: float = math.nan
    slack: float = SLOPE_SLACK
    verdict: str = "inconclusive"
    notes: list = field(default_factory=list)
    profile_ratios: dict = field(default_factory=dict)

    @property
    def eps(self):
        return [r.eps for r in self.sweep]

    @property
    def norms(self):
        return [r.total for r in self.sweep]

    def term(self, key):
        return [r.norms[key] for r in self.sweep]

    def verdict_block(self) -> str:
        lines = [f"rate study: shape={self.shape} alpha={self.alpha:g} mu={self.mu:g}",
                 f"  eps                : {' '.join(f'{e:.6g}' for e in self.eps)}",
                 f"  ||w||_L2           : {' '.join(f'{n:.6e}' for n in self.norms)}",
                 f"  fitted slope       : {self.fitted_slope:.4f}",
                 f"  log-corrected slope: {self.log_corrected_slope:.4f}",
                 f"  slope used         : {self.slope_used:.4f}",
                 f"  without largest eps: {self.slope_without_largest:.4f}",
                 f"  predicted slope    : {self.predicted_slope:.4f} (threshold {self.predicted_slope - self.slack:.4f})"]
        lines += [f"  note: {n}" for n in self.notes]
        lines.append(f"  VERDICT: {self.verdict.upper()}")
        return "\n".join(lines)


def assess(report: RateReport) -> RateReport:
    eps, norms = report.eps, report.norms
    report.predicted_slope = predicted_slope(report.alpha, report.mu)
    report.fitted_slope = fit_slope(eps, norms)
    report.log_corrected_slope = fit_slope(eps, norms, log_corrected=True)
    corrected = abs(report.fitted_slope - report.log_corrected_slope) > STABILITY_TOL
    report.slope_used = report.log_corrected_slope if corrected else report.fitted_slope
    order = np.argsort(eps)[:-1]
    report.slope_without_largest = fit_slope(np.asarray(eps)[order], np.asarray(norms)[order], corrected)
    threshold = report.predicted_slope - report.slack
    verdict = "pass" if report.slope_used >= threshold else "fail"
    if any(r.flagged for r in report.sweep):
        report.notes.append("quadrature flagged at some eps")
        verdict = "inconclusive"
    if abs(report.slope_without_largest - report.slope_used) > STABILITY_TOL:
        report.notes.append("fit moves by more than 0.05 when the largest eps is dropped")
        verdict = "inconclusive"
    if report.alpha >= 2 - report.mu:
        report.notes.append("alpha at or above the critical value: no verdict rendered")
        verdict = "inconclusive"
    report.verdict = verdict
    if report.mu == 1:
        prof = small_scale_profile(eps, report.alpha)
        for key in ("w3", "w4"):
            report.profile_ratios[key] = list(np.asarray(report.term(key)) / prof)
    return report


def rate_study(shape: ObstacleShape, alpha: float, mu: float, eps_list, f: VorticitySpec,
               quad: QuadratureSpec | None = None, slack: float = SLOPE_SLACK, out_dir=None,
               profile_kind: str = "quintic", verbose: bool = False) -> RateReport:
    eps_list = [float(e) for e in eps_list]
    if len(eps_list) < 4:
        raise ValueError("a rate study needs at least four values of eps")
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ValueError("eps_list must be strictly decreasing")
    quad = quad or QuadratureSpec()
    sweep: list[CorrectorReport] = []
    for e in eps_list:
        dom = build_domain(LatticeParams(e, alpha, mu), shape)
        rep = corrector_report(dom, f, quad, profile_kind)
        if verbose:
            print(f"  eps={e:g}: obstacles={dom.count} ||w||={rep.total:.6e}", flush=True)
        sweep.append(rep)
    report = assess(RateReport(alpha, mu, shape.kind, sweep, slack=slack))
    if out_dir is not None:
        write_rates(report, out_dir)
    return report


RATE_COLUMNS = ["eps", "w1", "w2", "w3", "w4", "w_omega", "w_incl", "w_total",
                "err_w", "err_w_incl", "flagged"]


def write_rates(report: RateReport, out_dir) -> None:
    path = os.path.join(out_dir, "rates.csv")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(RATE_COLUMNS)
        for r in report.sweep:
            n, er = r.norms, r.errors
            wr.writerow([repr(r.eps)] + [f"{n[k]:.12e}" for k in ("w1", "w2", "w3", "w4", "w", "w_incl")]
                        + [f"{r.total:.12e}", f"{er['w']:.3e}", f"{er['w_incl']:.3e}", int(r.flagged)])
    e0 = report.eps[0]
    n0 = report.norms[0]
    with open(os.path.join(out_dir, "rates.gp"), "w", newline="", encoding="utf-8") as fh:
        fh.write("set datafile separator ','\n")
        fh.write("set logscale xy\nset key left top\nset xlabel 'eps'\nset ylabel 'L2 norm'\n")
        fh.write(f"set title 'shape={report.shape} alpha={report.alpha:g} mu={report.mu:g}'\n")
        fh.write(f"fit_line(x) = {n0:.12e} * (x / {e0!r}) ** {report.fitted_slope:.6f}\n")
        fh.write(f"bound(x) = {n0:.12e} * (x / {e0!r}) ** {report.predicted_slope:.6f}\n")
        fh.write("plot 'rates.csv' every ::1 using 1:8 with linespoints title 'total', \\\n")
        fh.write("     '' every ::1 using 1:3 with linespoints title 'w2', \\\n")
        fh.write("     '' every ::1 using 1:5 with linespoints title 'w4', \\\n")
        fh.write(f"     fit_line(x) title 'fit slope {report.fitted_slope:.3f}', \\\n")
        fh.write(f"     bound(x) dashtype 2 title 'predicted slope {report.predicted_slope:.3f}'\n")


# ---------------------------------------------------------------------------
# dynamic convergence
# ---------------------------------------------------------------------------

@dataclass
class ConvergenceRow:
    eps: float
    t: float
    error: float


@dataclass
class ConvergenceTable:
    rows: list
    monotone: dict

    def errors_at(self, t):
        return [r.error for r in self.rows if abs(r.t - t) < 1e-12]

    def write(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(["eps", "t", "l2_error"])
            for r in self.rows:
                wr.writerow([repr(r.eps), f"{r.t:.10g}", f"{r.error:.12e}"])


def window_difference(domain, state_eps, state_plane, window, quad: QuadratureSpec) -> float:
    """||u_eps - u||_{L^2(window)} with u_eps extended by zero inside the obstacles."""
    pf, wf = WindowRegion(domain, window, "fluid").rule(quad)
    pi, wi = WindowRegion(domain, window, "inclusions").rule(quad)
    diff = state_eps.velocity(pf) - state_plane.velocity(pf)
    inner = state_plane.velocity(pi)
    return math.sqrt(float(np.sum(wf * np.abs(diff) ** 2) + np.sum(wi * np.abs(inner) ** 2)))


def convergence_study(eps_list, omega0: VorticitySpec, t_end: float, window, h: float, dt: float,
                      alpha: float = 1.0, mu: float = 0.0, shape: ObstacleShape | None = None,
                      quad: QuadratureSpec | None = None, verbose: bool = False) -> ConvergenceTable:
    """Corrector-driven and plane particle runs from the same omega0, compared on a window."""
    shape = shape or ObstacleShape.disk()
    quad = quad or QuadratureSpec(order=8)
    times = [0.0, t_end / 2, t_end]
    rows = []
    plane0 = initialize(omega0, h, "plane")
    plane_states = {0.0: plane0}
    s = plane0
    for a, b in zip(times, times[1:]):
        s = evolve(s, b, dt)
        plane_states[b] = s
    for e in eps_list:
        dom = build_domain(LatticeParams(float(e), alpha, mu), shape)
        s = initialize(omega0, h, "corrector", dom)
        for k, t in enumerate(times):
            if k:
                s = evolve(s, t, dt)
            err = window_difference(dom, s, plane_states[t], window, quad)
            rows.append(ConvergenceRow(float(e), t, err))
            if verbose:
                print(f"  eps={e:g} t={t:g}: error={err:.6e}", flush=True)
    monotone = {}
    for t in times:
        errs = [r.error for r in rows if r.t == t]
        monotone[t] = all(b < a for a, b in zip(errs, errs[1:]))
    return ConvergenceTable(rows, monotone)
