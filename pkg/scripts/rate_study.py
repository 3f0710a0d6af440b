"""Decay-rate sweeps of the error-field norm for the two lattice regimes."""
import argparse
import os
import time

from euler_sieve.analysis import rate_study
from euler_sieve.field import QuadratureSpec, VorticitySpec
from euler_sieve.geometry import ObstacleShape

CASES = {"dilute": (1.0, 0.0), "layered": (0.5, 1.0)}


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--case", choices=sorted(CASES), nargs="+", default=sorted(CASES))
    ap.add_argument("--eps", type=float, nargs="+", default=[0.1, 0.05, 0.025, 0.0125])
    ap.add_argument("--order", type=int, default=8)
    ap.add_argument("--out", default="out/rates")
    args = ap.parse_args()
    f = VorticitySpec("radial_bump", 0.5 + 0.55j, 0.3)
    for case in args.case:
        alpha, mu = CASES[case]
        out = os.path.join(args.out, case)
        os.makedirs(out, exist_ok=True)
        t0 = time.time()
        rep = rate_study(ObstacleShape.disk(), alpha, mu, args.eps, f, QuadratureSpec(order=args.order),
                         out_dir=out, verbose=True)
        print(rep.verdict_block())
        print(f"  ({time.time() - t0:.0f} s)", flush=True)


if __name__ == "__main__":
    main()
