"""Discrete H3 norm of the velocity over time for several slip lengths.

Data that vanish on the wall but have nonzero normal derivative violate the
slip condition at t = 0; the H3 norm then spikes in a short initial layer
whose height grows with k. Data with vanishing normal derivative do not.

    python scripts/initial_layer.py [--n 64]
"""
import argparse

import numpy as np

from navslip.dynamics import INITIAL_DATA, PhysParams, StepControl, compatibility_defect, run
from navslip.lame import LameParams, SlipBC
from navslip.mesh import build_grid


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=64)
    args = ap.parse_args()
    g = build_grid(1.0, args.n, args.n)
    outs = list(np.linspace(0, 0.5, 51))
    for name in ("default", "compatible"):
        print(f"initial data: {name}")
        for k in (0.0, 0.1, 1.0):
            s0 = INITIAL_DATA[name](g)
            res = run(s0, PhysParams(LameParams(0.1), bc=SlipBC(k)), StepControl(), 0.5, outs)
            h3 = res.ledger.column("u_h3")
            print(f"  k={k:<4g} wall defect {compatibility_defect(s0, k, 0.1):.2e}  "
                  f"|u|_H3 at t=0,0.01,0.02,0.05,0.5: "
                  + ", ".join(f"{h3[i]:.1f}" for i in (0, 1, 2, 5, 50)) + f"  sup {h3.max():.1f}")


if __name__ == "__main__":
    main()
