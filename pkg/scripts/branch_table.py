"""Pull-in thresholds by continuation and shooting, radial balls N = 1..10."""

import argparse
import csv
import sys
import time

from advmems import build_grid, continue_branch, shooting_oracle


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--m", type=int, default=1025)
    ap.add_argument("--dims", type=int, nargs="+", default=list(range(1, 11)))
    args = ap.parse_args()

    w = csv.writer(sys.stdout)
    w.writerow(["N", "m", "lambda_star_continuation", "bracket_width", "lambda_star_shooting", "rel_diff",
                "points", "seconds"])
    for N in args.dims:
        t0 = time.perf_counter()
        # N = 1 is the unit interval, i.e. a ball of radius 1/2
        g = build_grid("interval", m=args.m) if N == 1 else build_grid("radial", N=N, m=args.m)
        b = continue_branch(g)
        ref = shooting_oracle(N, radius=0.5 if N == 1 else 1.0)
        rel = abs(b.lam_star - ref.lam_star) / ref.lam_star
        w.writerow([N, args.m, f"{b.lam_star:.10f}", f"{b.width:.2e}", f"{ref.lam_star:.10f}", f"{rel:.2e}",
                    len(b.points), f"{time.perf_counter() - t0:.2f}"])


if __name__ == "__main__":
    main()
