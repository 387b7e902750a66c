#!/usr/bin/env python3
"""Finite-difference step-size sweep for every model variant.

Shows the usual V-shaped error curve: truncation error dominates at large
steps, round-off at small ones.
"""

import argparse

from seqfusion.training import grad_check_variant


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--steps", type=float, nargs="+",
                    default=[1e-3, 1e-4, 1e-5, 1e-6, 1e-7])
    args = ap.parse_args()

    for variant in ("conv_l", "fc_l", "fu_1", "fu_2"):
        row = []
        for h in args.steps:
            rep = grad_check_variant(variant, seed=args.seed, fd_step=h)
            row.append(f"{rep.max_rel_error:.2e}")
        print(f"{variant:8s} " + "  ".join(
            f"h={h:.0e}:{e}" for h, e in zip(args.steps, row)))


if __name__ == "__main__":
    main()
