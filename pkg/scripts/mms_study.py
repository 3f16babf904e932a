"""Manufactured-solution order study for both transport schemes.

    python scripts/mms_study.py [--k 0 1] [--resolutions 32 64 128]
"""
import argparse

from navslip.lame import LameParams
from navslip.mms import mms_verify


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--k", type=float, nargs="+", default=[0.0, 1.0])
    ap.add_argument("--resolutions", type=int, nargs="+", default=[32, 64, 128])
    args = ap.parse_args()
    for k in args.k:
        for variant in ("upwind1", "muscl_minmod"):
            r = mms_verify(args.resolutions, k=k, lame=LameParams(0.1), variant=variant)
            errs = ", ".join(f"{e:.3e}" for e in r.u_errors)
            print(f"k={k:<4g} {variant:13s} |u-u*|: {errs}  order u {r.u_order:.3f}, rho {r.rho_order:.3f}")


if __name__ == "__main__":
    main()
