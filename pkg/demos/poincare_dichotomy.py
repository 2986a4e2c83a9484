"""Spectral gap of truncated boxes for tails above and below alpha = 1.

With eps >= alpha the gap settles as the box grows; with eps < alpha it
keeps shrinking, and the plateau witnesses push Var/D up without bound.
"""
import argparse

from singstab.forms import dirichlet_form, variance_and_mean
from singstab.measure import ProductPolynomial
from singstab.rates import poincare_verdict
from singstab.spectral import gap_sweep, witness_family


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--alpha", type=float, default=1.0)
    ap.add_argument("--radii", type=float, nargs="+", default=[25, 50, 100])
    ap.add_argument("--n", type=int, default=512)
    args = ap.parse_args()

    for eps in (0.5, 2.0):
        pot = ProductPolynomial([eps])
        print(f"eps={eps}: {poincare_verdict(pot, alpha=args.alpha)}")
        recs, verdict = gap_sweep(pot, args.alpha, args.radii, n=args.n)
        for r in recs:
            print(f"  R={r.R:6g}  lambda1={r.lambda1:.5g}  ratio={r.ratio:.4f}")
        print(f"  sweep: {verdict}")

    pot = ProductPolynomial([0.5])
    print("plateau witnesses for eps=0.5:")
    for k in range(1, 7):
        f = witness_family("poly_subcritical", k, args.alpha, 0.5)
        _, var = variance_and_mean(pot, f)
        D = dirichlet_form(pot, f, args.alpha)
        print(f"  n={k}  Var/D={var.value / D.value:.4g}")


if __name__ == "__main__":
    main()
