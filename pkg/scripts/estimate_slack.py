"""Slack of the weighted L^p estimate and the Hardy bound along a branch.

Prints the relative slack (rhs - lhs) / max(lhs, rhs) of the estimate on a
(beta, t/t_max) grid at the last branch point, and the Hardy slack with
E = phi for the same branch, for a chosen drift.
"""

import argparse

import numpy as np

from advmems import build_grid, continue_branch, decompose
from advmems.fieldexpr import sample_vector
from advmems.grid import Field
from advmems.ineq import HardyProbe, hardy_check, main_estimate_check, random_test_functions, t_max
from advmems.spectral import linearized_stability


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--m", type=int, default=65)
    ap.add_argument("--drift", nargs=2, default=["sin(pi*y)", "0"], metavar=("CX", "CY"))
    ap.add_argument("--amp", type=float, default=1.0)
    args = ap.parse_args()

    g = build_grid("rectangle", m=args.m)
    c = args.amp * sample_vector(g, args.drift).values
    d = decompose(g, c)
    b = continue_branch(g, c)
    pt = b.points[-1]
    phi = linearized_stability(g, c, pt.u, pt.lam).phi
    print(f"lambda* ~ {b.lam_star:.6f}  |a|_inf = {d.a_sup():.4f}  last point lambda = {pt.lam:.6f}")

    fracs = np.array([0.1, 0.3, 0.5, 0.7, 0.9, 0.99])
    print("beta  " + " ".join(f"{f:>8.2f}" for f in fracs))
    for beta in (1.05, 1.25, 1.5, 1.75, 1.95):
        s = [main_estimate_check(g, d, pt.u, pt.lam, beta, f * t_max(beta), phi=phi) for f in fracs]
        print(f"{beta:<5} " + " ".join(f"{r.slack / r.scale:>8.4f}" for r in s))

    psis = random_test_functions(g, 200)
    for beta in (1.0, 1.5, 2.0):
        r = hardy_check(HardyProbe(Field(g, d.weight), phi, beta, psis))
        print(f"Hardy beta={beta}: min scaled slack {r.scaled_min():.4f}, median {np.median(r.slack / r.lhs):.4f}")


if __name__ == "__main__":
    main()
