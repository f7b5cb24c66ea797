"""L^p trend of (1 - u)^-2 toward lambda* on the ball, over dimension and resolution."""

import argparse
import json

from advmems import build_grid, continue_branch
from advmems.ineq import regularity_diagnostic


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--dims", type=int, nargs="+", default=[3, 5, 7, 8, 9])
    ap.add_argument("--m", type=int, nargs="+", default=[513, 1025, 2049])
    ap.add_argument("--json", action="store_true", help="dump full reports instead of a table")
    args = ap.parse_args()

    rows = []
    print(f"{'N':>3} {'m':>6} {'3N/4':>6} {'growth':>8} {'ratio':>7} {'int ratio':>9}  verdict")
    for N in args.dims:
        for m in args.m:
            rep = regularity_diagnostic(continue_branch(build_grid("radial", N=N, m=m)))
            tr = rep.trend(rep.critical_p)
            rows.append(dict(m=m, **rep.to_json()))
            print(f"{N:>3} {m:>6} {rep.critical_p:>6.2f} {tr.growth:>8.3f} {tr.last_increment_ratio:>7.3f} "
                  f"{tr.integral_ratio:>9.3f}  {rep.verdict}")
    if args.json:
        print(json.dumps(rows, indent=2))


if __name__ == "__main__":
    main()
