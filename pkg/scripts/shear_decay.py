"""Low-Mach shear decay against the heat-equation factor, and the
time-step study of the discrete energy-identity residual.

    python scripts/shear_decay.py [--n 64]
"""
import argparse

import numpy as np

from navslip.dynamics import INITIAL_DATA, PhysParams, StepControl, run
from navslip.lame import LameParams, SlipBC
from navslip.mesh import build_grid


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=64)
    ap.add_argument("--mu", type=float, default=0.1)
    args = ap.parse_args()
    g = build_grid(1.0, args.n, args.n)
    p = PhysParams(LameParams(args.mu), bc=SlipBC(0.0))

    res = run(INITIAL_DATA["shear"](g), p, StepControl(), 0.1, [0.1])
    factor = res.trajectory[-1].u.values[0].max() / 0.01
    print(f"decay factor at t=0.1: {factor:.6f}  (oracle {np.exp(-args.mu * np.pi ** 2 * 0.1):.6f})")

    for name in ("shear", "default"):
        vals = []
        for cfl in (0.4, 0.2, 0.1):
            r = run(INITIAL_DATA[name](g), p, StepControl(cfl_factor=cfl), 0.5, [0.5])
            vals.append(r.ledger.integrated_residual())
        orders = [np.log2(a / b) for a, b in zip(vals, vals[1:])]
        print(f"{name:8s} integrated |residual|: " + ", ".join(f"{v:.3e}" for v in vals)
              + "  orders: " + ", ".join(f"{o:.3f}" for o in orders))


if __name__ == "__main__":
    main()
