"""Static error ||u_eps - K[f 1_Omega]||_L2 over successive halvings of eps, plus Leray checks."""
import argparse
import time

from euler_sieve.exterior_solver import MfsParams, leray_check, solve_exterior, static_convergence
from euler_sieve.field import QuadratureSpec, VorticitySpec
from euler_sieve.geometry import LatticeParams, build_domain


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--eps", type=float, nargs="+", default=[0.1, 0.05, 0.025, 0.0125])
    ap.add_argument("--alpha", type=float, default=1.0)
    ap.add_argument("--mu", type=float, default=0.0)
    ap.add_argument("--order", type=int, default=8)
    ap.add_argument("--leray", action="store_true", help="also run the 3x1 and 5x3 Leray checks")
    args = ap.parse_args()
    f = VorticitySpec("radial_bump", 0.5 + 0.55j, 0.3)
    quad = QuadratureSpec(order=args.order)
    for e in args.eps:
        t0 = time.time()
        d = build_domain(LatticeParams(e, args.alpha, args.mu))
        print(f"eps={e:g} obstacles={d.count} error={static_convergence(d, f, quad):.6e} "
              f"({time.time() - t0:.0f} s)", flush=True)
    if args.leray:
        for e, mu in ((0.1, 0.0), (0.05, 0.7)):
            t0 = time.time()
            d = build_domain(LatticeParams(e, 1.0, mu))
            # the boundary solve needs order 16 where supp f meets the obstacles
            sol = solve_exterior(d, f, MfsParams(), QuadratureSpec(order=max(16, args.order)))
            rep = leray_check(d, f, quad, solution=sol)
            print(f"{d.n1}x{d.n2}: ||r||={rep.r_norm:.6e} ||w||={rep.w_norm:.6e} ratio={rep.ratio:.4f} "
                  f"holds={rep.holds} flagged={rep.flagged} ({time.time() - t0:.0f} s)", flush=True)


if __name__ == "__main__":
    main()
