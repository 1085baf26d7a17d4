"""Estimate the normalized hypervolume of the true DTLZ2 front.

The Monte-Carlo value is what the convergence check compares against; the
closed form (box minus the positive orthant of the unit ball) is printed
alongside as a sanity check.
"""

import argparse
import math

import numpy as np

from adaptmoea.hv import dtlz2_true_hv


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--samples", type=int, default=1_000_000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--ref", type=float, default=1.1, help="reference point per objective")
    args = ap.parse_args()
    frac, se = dtlz2_true_hv(args.ref, 3, args.samples, np.random.default_rng(args.seed))
    exact = (args.ref**3 - math.pi / 6) / args.ref**3
    print(f"monte-carlo  {frac:.6f} +- {se:.6f}")
    print(f"closed form  {exact:.7f}")


if __name__ == "__main__":
    main()
