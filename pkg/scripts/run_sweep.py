"""Vanishing-slip sweep on the default 64 x 64 channel.

    python scripts/run_sweep.py [--n 64] [--initial default|compatible] [--out out/sweep]
"""
import argparse
import json
from pathlib import Path

from navslip.experiments import SweepSetup, friction_sweep
from navslip.lame import LameParams
from navslip.mesh import build_grid


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=64)
    ap.add_argument("--t-final", type=float, default=0.5)
    ap.add_argument("--initial", default="default")
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--out", default="out/sweep")
    args = ap.parse_args()

    setup = SweepSetup(build_grid(1.0, args.n, args.n), LameParams(0.1), t_final=args.t_final,
                       initial=args.initial)
    rep = friction_sweep(setup, threads=args.threads)

    print(f"{'k':>8} {'sup sq err':>12} {'sup |w|':>11} {'sup |phi|':>11} {'sup |w|H1':>11} "
          f"{'trace':>11} {'E gap':>11}")
    for m in rep.metrics:
        print(f"{m.k:8.0e} {m.sup_sq_err:12.4e} {m.sup_w_l2:11.4e} {m.sup_phi_l2:11.4e} "
              f"{m.sup_w_h1:11.4e} {m.trace_integral:11.4e} {m.energy_gap:11.4e}")
    print(f"sq-err slope {rep.sq_err_fit.slope:.3f} (R2 {rep.sq_err_fit.r_squared:.4f}), "
          f"trace slope {rep.trace_fit.slope:.3f} (R2 {rep.trace_fit.r_squared:.4f}), M0 = {rep.m0:.4f}")
    print("sup norms per k:")
    for k, norms in sorted(rep.run_norms.items(), reverse=True):
        print(f"  k={k:<6g} " + "  ".join(f"{n}={v:.3f}" for n, v in norms.items()))
    for name, ok in rep.acceptance.items():
        print(f"  {'PASS' if ok else 'FAIL'}  {name}")

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / f"sweep_{args.initial}.json").write_text(json.dumps(rep.to_json_dict(), indent=2))


if __name__ == "__main__":
    main()
