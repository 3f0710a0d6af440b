"""Command line front end: ``euler-sieve <subcommand> --config run.ini``.

Exit codes: 0 success, 1 failed verdict or flagged numerics, 2 configuration error.
"""
from __future__ import annotations

import argparse
import csv
import os
import sys

import numpy as np

from . import __version__, parallel
from .analysis import convergence_study, rate_study
from .biotsavart import VelocityEvaluator, exterior_obstacle_evaluator, plane_evaluator
from .conformal import ObstacleMap
from .config import ConfigError, RunConfig
from .corrector import CorrectorModel, corrector_report
from .exterior_solver import MfsError, solve_exterior
from .geometry import build_domain
from .transport import TransportError, initialize, run as run_transport

SUBCOMMANDS = ("gen-domain", "eval-field", "corrector-norms", "solve-exterior", "evolve",
               "rate-study", "convergence-study")


def _write_manifest(cfg: RunConfig, out: str, sub: str) -> None:
    with open(os.path.join(out, "manifest.txt"), "w", newline="", encoding="utf-8") as fh:
        fh.write(f"euler_sieve {__version__}\n")
        fh.write(f"subcommand = {sub}\n\n")
        fh.write(cfg.dump())


def cmd_gen_domain(cfg, out):
    d = build_domain(cfg.lattice(), cfg.shape())
    d.write_centers(os.path.join(out, "centers.csv"))
    m = ObstacleMap(d.shape).with_lipschitz()
    with open(os.path.join(out, "domain.csv"), "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["n1", "n2", "x0", "x1", "y0", "y1", "hausdorff_gap", "hausdorff_bound",
                     "count_bound_holds", "beta", "h_sup", "lip_T", "lip_Tinv"])
        wr.writerow([d.n1, d.n2, *(repr(v) for v in d.rect), f"{d.hausdorff_gap():.12e}",
                     f"{d.hausdorff_bound():.12e}", int(d.count_bound_holds()), repr(m.beta),
                     f"{m.h_sup:.12e}", f"{m.lip_T:.12e}", f"{m.lip_Tinv:.12e}"])
    return 0


def _evaluator(cfg, d, f, quad) -> VelocityEvaluator:
    which = cfg.get("study", "provenance")
    if which == "plane":
        return plane_evaluator(f, quad, d)
    if which == "exterior_obstacle":
        return exterior_obstacle_evaluator(d, 1, 1, f, quad)
    if which == "mfs_solution":
        return solve_exterior(d, f, cfg.mfs(), quad).evaluator()
    if which in ("corrector", "w", "w1", "w2", "w3", "w4"):
        return CorrectorModel(d, f, quad, cfg.get("domain", "cutoff_profile")).evaluator(which)
    raise ConfigError(f"study.provenance: unknown field {which!r}")


def cmd_eval_field(cfg, out):
    d = build_domain(cfg.lattice(), cfg.shape())
    f, quad = cfg.vorticity(), cfg.quadrature()
    ev = _evaluator(cfg, d, f, quad)
    x0, x1, y0, y1, nx, ny = cfg.grid()
    gx, gy = np.meshgrid(np.linspace(x0, x1, nx), np.linspace(y0, y1, ny))
    pts = (gx + 1j * gy).ravel()
    if ev.provenance.startswith("exterior_obstacle"):
        pts = pts[~d.shape.inside(d.local(pts, 1, 1)) | (np.abs(d.local(pts, 1, 1)) >= 1)]
    u = ev(pts)
    with open(os.path.join(out, "field.csv"), "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["x", "y", "u1", "u2", "provenance"])
        for p, v in zip(pts, u):
            wr.writerow([repr(float(p.real)), repr(float(p.imag)), f"{v.real:.15e}", f"{v.imag:.15e}",
                         ev.provenance])
    return 0


def cmd_corrector_norms(cfg, out):
    d = build_domain(cfg.lattice(), cfg.shape())
    rep = corrector_report(d, cfg.vorticity(), cfg.quadrature(), cfg.get("domain", "cutoff_profile"),
                           csv_path=os.path.join(out, "norms.csv"))
    print(f"||w||_L2(Omega) = {rep.norms['w']:.6e}, ||w||_L2(inclusions) = {rep.norms['w_incl']:.6e}"
          + (" [FLAGGED]" if rep.flagged else ""))
    return 1 if rep.flagged else 0


def cmd_solve_exterior(cfg, out):
    d = build_domain(cfg.lattice(), cfg.shape())
    sol = solve_exterior(d, cfg.vorticity(), cfg.mfs(), cfg.quadrature(),
                         csv_path=os.path.join(out, "mfs_report.csv"))
    print(f"boundary residual {sol.residual:.3e} (audit {sol.audit_residual:.3e}), rank {sol.rank}"
          + (" [FLAGGED]" if sol.flagged else ""))
    return 1 if sol.flagged else 0


def cmd_evolve(cfg, out):
    backend = cfg.get("transport", "backend")
    d = None if backend == "plane" else build_domain(cfg.lattice(), cfg.shape())
    f = cfg.vorticity()
    kw = {"mfs": {"params": cfg.mfs()}}.get(backend, {})
    state = initialize(f, cfg.num("transport", "h"), backend, d, cfg.num("transport", "blob_ratio"), **kw)
    final, rows = run_transport(state, cfg.num("transport", "t_end"), cfg.num("transport", "dt"), out,
                                cfg.num("transport", "stride", int), f.center)
    first, last = rows[0], rows[-1]
    drift = abs(last.l1 - first.l1) / first.l1
    circ = max((float(np.abs(r.circulations).max(initial=0.0)) for r in rows), default=0.0)
    print(f"t={final.t:g}: L1 drift {drift:.3e}, max |circulation| {circ:.3e}")
    return 0


def cmd_rate_study(cfg, out):
    rep = rate_study(cfg.shape(), cfg.num("domain", "alpha"), cfg.num("domain", "mu"), cfg.eps_list(),
                     cfg.vorticity(), cfg.quadrature(), cfg.num("study", "slack"), out,
                     cfg.get("domain", "cutoff_profile"))
    print(rep.verdict_block())
    return 0 if rep.verdict == "pass" else 1


def cmd_convergence_study(cfg, out):
    tab = convergence_study(cfg.eps_list(), cfg.vorticity(), cfg.num("transport", "t_end"), cfg.window(),
                            cfg.num("transport", "h"), cfg.num("transport", "dt"), cfg.num("domain", "alpha"),
                            cfg.num("domain", "mu"), cfg.shape(), cfg.quadrature())
    tab.write(os.path.join(out, "convergence.csv"))
    t_end = cfg.num("transport", "t_end")
    for t, ok in tab.monotone.items():
        print(f"t={t:g}: errors {' '.join(f'{e:.4e}' for e in tab.errors_at(t))} "
              f"{'decreasing' if ok else 'NOT decreasing'}")
    return 0 if tab.monotone[t_end] else 1


COMMANDS = {
    "gen-domain": cmd_gen_domain,
    "eval-field": cmd_eval_field,
    "corrector-norms": cmd_corrector_norms,
    "solve-exterior": cmd_solve_exterior,
    "evolve": cmd_evolve,
    "rate-study": cmd_rate_study,
    "convergence-study": cmd_convergence_study,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="euler-sieve", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"euler_sieve {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", "-c", help="INI file with [domain], [field], ... sections")
        sp.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                        help="override one config key (repeatable)")
        sp.add_argument("--output-dir", "-o")
        sp.add_argument("--seed", type=int)
        if name == "evolve":
            sp.add_argument("--t-end", type=float)
            sp.add_argument("--dt", type=float)
            sp.add_argument("--h", type=float)
            sp.add_argument("--backend", choices=["plane", "corrector", "mfs"])
    return p


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {}
    try:
        for item in args.set:
            key, sep, val = item.partition("=")
            if not sep:
                raise ConfigError(f"--set expects SECTION.KEY=VALUE, got {item!r}")
            overrides[key.strip()] = val.strip()
        if args.output_dir:
            overrides["study.output_dir"] = args.output_dir
        if args.seed is not None:
            overrides["study.seed"] = str(args.seed)
        for flag, key in (("t_end", "t_end"), ("dt", "dt"), ("h", "h"), ("backend", "backend")):
            val = getattr(args, flag, None)
            if val is not None:
                overrides[f"transport.{key}"] = str(val)
        cfg = RunConfig.load(args.config, overrides)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    threads = cfg.num("study", "threads", int)
    parallel.set_width(threads if threads > 0 else None)
    out = cfg.get("study", "output_dir")
    os.makedirs(out, exist_ok=True)
    _write_manifest(cfg, out, args.command)
    np.random.seed(cfg.num("study", "seed", int) % 2**32)
    try:
        return COMMANDS[args.command](cfg, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (MfsError, TransportError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
