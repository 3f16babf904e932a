"""Command line entry point: ``python -m navslip <subcommand> ...``.

Exit codes: 0 success, 2 acceptance failure, 1 runtime error (including any
non-finite number in the output).
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import dynamics, experiments, lame, mms
from .config import ConfigError, RunConfig, load_config
from .mesh import VectorField

log = logging.getLogger("navslip")

EXIT_OK, EXIT_RUNTIME, EXIT_ACCEPTANCE = 0, 1, 2


class NonFiniteOutput(RuntimeError):
    pass


def _fmt(x) -> str:
    x = float(x)
    if not math.isfinite(x):
        raise NonFiniteOutput(f"non-finite value {x!r} in output")
    return f"{x + 0.0:.17g}"   # + 0.0 folds -0.0 into 0


def _check_finite(obj, where="output"):
    if isinstance(obj, dict):
        for key, v in obj.items():
            _check_finite(v, f"{where}.{key}")
    elif isinstance(obj, (list, tuple)):
        for i, v in enumerate(obj):
            _check_finite(v, f"{where}[{i}]")
    elif isinstance(obj, float) and not math.isfinite(obj):
        raise NonFiniteOutput(f"non-finite value at {where}")


def write_ledger_csv(ledger: dynamics.EnergyLedger, path: Path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(dynamics.CSV_COLUMNS)
        for row in ledger.rows():
            w.writerow([_fmt(v) for v in row])


def write_json(obj, path: Path):
    _check_finite(obj)
    path.write_text(json.dumps(obj, indent=2, sort_keys=False) + "\n")


def _k_tag(k: float) -> str:
    return f"k{float(k):.6g}"


# ---------------------------------------------------------------------------
# subcommands

def cmd_run(cfg: RunConfig, args) -> int:
    out = Path(args.out)
    state = dynamics.INITIAL_DATA[cfg.experiment.initial](cfg.grid())
    res = dynamics.run(state, cfg.phys(), cfg.ctrl(), cfg.experiment.t_final, cfg.output_times())
    write_ledger_csv(res.ledger, out / f"ledger_{_k_tag(cfg.physics.k)}.csv")
    if res.blow_up:
        print(f"run failed: {res.failure}", file=sys.stderr)
        return EXIT_RUNTIME
    last = res.ledger.records[-1]
    print(f"t = {last.t:g}  e_kin = {last.e_kin:.6e}  mass = {last.mass:.15g}")
    return EXIT_OK


def cmd_sweep(cfg: RunConfig, args) -> int:
    out = Path(args.out)
    rep = experiments.friction_sweep(cfg.sweep_setup(), cfg.experiment.k_list, threads=args.threads)
    for k, res in rep.runs.items():
        write_ledger_csv(res.ledger, out / f"ledger_{_k_tag(k)}.csv")
    doc = rep.to_json_dict(cfg.to_dict())
    write_json(doc, out / "sweep.json")
    for name, ok in rep.acceptance.items():
        print(f"{'PASS' if ok else 'FAIL'}  {name}")
    if rep.blow_up:
        print(f"note: a run blew up; comparisons truncated at T* = {rep.t_star:g}")
    return EXIT_OK if rep.passed else EXIT_ACCEPTANCE


def cmd_lame_test(cfg: RunConfig, args) -> int:
    out = Path(args.out)
    s0 = dynamics.INITIAL_DATA[cfg.experiment.initial](cfg.grid())
    g = VectorField(s0.grid, s0.rho.values * s0.u.values)
    if not np.any(g.values):
        g = VectorField(s0.grid, np.stack([np.full(s0.grid.shape, 2.0), np.zeros(s0.grid.shape)]))
    ks = sorted(set(cfg.experiment.k_list))
    rep = lame.k_uniformity_report(g, cfg.lame(), ks, tol=cfg.numerics.linear_tol)
    write_json(rep.to_dict(), out / "k_uniformity.json")
    print(f"max/min R over k = {rep.max_min_ratio:.4f} (threshold {rep.threshold:g})")
    return EXIT_OK if rep.passed else EXIT_ACCEPTANCE


def cmd_eig(cfg: RunConfig, args) -> int:
    out = Path(args.out)
    bc = cfg.phys().bc
    pairs = lame.lame_eigenpairs(cfg.lame(), bc, args.count, cfg.grid())
    with open(out / f"eigenvalues_{_k_tag(bc.k)}.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("index", "eigenvalue"))
        for i, (val, _) in enumerate(pairs):
            w.writerow((i, _fmt(val)))
    for i, (val, _) in enumerate(pairs):
        print(f"{i:3d}  {val:.12g}")
    return EXIT_OK


def cmd_mms(cfg: RunConfig, args) -> int:
    out = Path(args.out)
    reps = []
    for k in sorted({0.0, cfg.physics.k}):
        rep = mms.mms_verify(args.resolutions, k=k, lame=cfg.lame(), pressure_amp=cfg.physics.pressure_A,
                             gamma=cfg.physics.pressure_gamma, lx=cfg.domain.lx,
                             variant=args.scheme or "muscl_minmod")
        if rep.failure:
            print(rep.failure, file=sys.stderr)
            return EXIT_RUNTIME
        reps.append(rep)
        print(f"k = {k:g}: velocity order {rep.u_order:.3f}, density order {rep.rho_order:.3f}")
    write_json({"reports": [r.to_dict() for r in reps]}, out / "mms.json")
    return EXIT_OK if all(r.passed for r in reps) else EXIT_ACCEPTANCE


def read_points_csv(path) -> list[tuple[float, float]]:
    """Two numeric columns (k, value); a non-numeric first row is taken as a header."""
    pts = []
    with open(path, newline="") as fh:
        for i, row in enumerate(csv.reader(fh)):
            if not row or row[0].lstrip().startswith("#"):
                continue
            try:
                pts.append((float(row[0]), float(row[1])))
            except (ValueError, IndexError):
                if i == 0:
                    continue
                raise ValueError(f"{path}: bad row {i + 1}: {row}") from None
    return pts


def cmd_fit(args) -> int:
    fit = experiments.fit_rate(read_points_csv(args.csv))
    _check_finite(fit.to_dict())
    print(f"slope = {fit.slope:.6g}  intercept = {fit.intercept:.6g}  r2 = {fit.r_squared:.6g}")
    return EXIT_OK


COMMANDS = {"run": cmd_run, "sweep": cmd_sweep, "lame-test": cmd_lame_test, "eig": cmd_eig, "mms": cmd_mms}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="navslip", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, needs_config=True):
        if needs_config:
            p.add_argument("--config", required=True, help="sectioned key = value config file")
        p.add_argument("--out", default="./out", help="output directory (default ./out)")
        p.add_argument("--threads", type=int, default=os.cpu_count() or 1,
                       help="worker processes for sweeps (default: hardware count)")
        p.add_argument("--seed", type=int, default=0,
                       help="reserved; runs are deterministic")
        p.add_argument("-v", "--verbose", action="store_true")
        return p

    common(sub.add_parser("run", help="single run, ledger CSV"))
    common(sub.add_parser("sweep", help="friction sweep over k_list, JSON report"))
    common(sub.add_parser("lame-test", help="K-uniformity of the elliptic estimate"))
    common(sub.add_parser("eig", help="smallest eigenpairs of -L")).add_argument(
        "--count", type=int, default=6)
    p = common(sub.add_parser("mms", help="manufactured-solution order study"))
    p.add_argument("--resolutions", type=int, nargs="+", default=list(mms.DEFAULT_RESOLUTIONS))
    p.add_argument("--scheme", choices=("upwind1", "muscl_minmod"), default=None,
                   help="transport scheme for the study (default muscl_minmod)")
    common(sub.add_parser("fit", help="power-law fit of a (k, value) CSV"), needs_config=False).add_argument(
        "--csv", required=True)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "fit":
            return cmd_fit(args)
        cfg = load_config(args.config)
        Path(args.out).mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](cfg, args)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (NonFiniteOutput, lame.SolverError, lame.EigenError, ValueError, RuntimeError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
