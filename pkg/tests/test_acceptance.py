"""Acceptance gate: the eleven criteria at their stated tolerances.

Each test records one PASS/FAIL line, printed in the terminal summary.
Default scale is the 64 x 64 channel, t_final = 0.5, default physics.
"""
import numpy as np
import pytest

from navslip.dynamics import INITIAL_DATA, PhysParams, StepControl, run
from navslip.experiments import SweepSetup, friction_sweep
from navslip.lame import LameParams, NoSlipBC, SlipBC, k_uniformity_report, solve_lame
from navslip.mesh import VectorField, build_grid
from navslip.mms import mms_verify

N = 64
T_FINAL = 0.5
MU = 0.1


def record(log, n, ok, detail):
    line = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    log[n] = line
    print(line)


@pytest.fixture(scope="module")
def grid():
    return build_grid(1.0, N, N)


@pytest.fixture(scope="module")
def sweep(grid):
    return friction_sweep(SweepSetup(grid, LameParams(MU, 0.0), t_final=T_FINAL, output_count=50))


@pytest.fixture(scope="module")
def shear_runs(grid):
    p = PhysParams(LameParams(MU, 0.0), bc=SlipBC(0.0))
    return {cfl: run(INITIAL_DATA["shear"](grid), p, StepControl(cfl_factor=cfl), T_FINAL, [0.1, T_FINAL])
            for cfl in (0.4, 0.2, 0.1)}


def test_c01_robin_lame_analytic(grid, acceptance_log):
    errs = {}
    for k in (0.0, 0.1, 1.0, 10.0):
        u = solve_lame(VectorField(grid, np.stack([np.full(grid.shape, 2.0), np.zeros(grid.shape)])),
                       SlipBC(k), LameParams(1.0, 0.0))
        errs[k] = float(np.abs(u.values[0] - (-grid.Z ** 2 + grid.Z + k)).max())
    ok = max(errs.values()) <= 1e-9
    record(acceptance_log, 1, ok, "max nodal error " + ", ".join(f"k={k:g}: {e:.2e}" for k, e in errs.items()))
    assert ok


def smooth_sources(grid):
    X, Z = grid.X, grid.Z
    a = 2 * np.pi / grid.lx
    flow = np.sin(np.pi * Z) * (1 + 0.1 * np.cos(a * X))
    mixed_z = 0.5 * np.sin(a * X) * np.sin(np.pi * Z)
    return {
        "constant": np.stack([np.full(grid.shape, 2.0), np.zeros(grid.shape)]),
        "channel": np.stack([flow, np.zeros(grid.shape)]),
        "mixed": np.stack([np.cos(a * X) * Z * (1 - Z) + 1.0, mixed_z]),
    }


K_LADDER_ELLIPTIC = [0.0, 1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2, 1e3]


def test_c02_k_uniform_elliptic(grid, acceptance_log):
    ratios = {}
    for name, g in smooth_sources(grid).items():
        ratios[name] = k_uniformity_report(VectorField(grid, g), LameParams(1.0, 0.0), K_LADDER_ELLIPTIC).max_min_ratio
    ok = all(r <= 3.0 for r in ratios.values())
    low_mu = {name: k_uniformity_report(VectorField(grid, g), LameParams(MU, 0.0), K_LADDER_ELLIPTIC).max_min_ratio
              for name, g in smooth_sources(grid).items()}
    record(acceptance_log, 2, ok,
           "max/min R at mu=1: " + ", ".join(f"{n}={r:.3f}" for n, r in ratios.items())
           + " | diagnostic mu=0.1: " + ", ".join(f"{n}={r:.2f}" for n, r in low_mu.items()))
    assert ok


def test_c03_trace_bound(sweep, acceptance_log):
    ok = sweep.acceptance["trace_bound"] and sweep.acceptance["trace_rate"]
    worst = max(m.trace_integral / (m.k * sweep.m0) for m in sweep.metrics if m.k > 0)
    record(acceptance_log, 3, ok,
           f"max trace/(k M0) = {worst:.3g} (<= 1.2); slope {sweep.trace_fit.slope:.3f} "
           f"(>= 0.9), R2 {sweep.trace_fit.r_squared:.4f}")
    assert ok


def test_c04_gronwall_rate(sweep, acceptance_log):
    ok = sweep.acceptance["sq_err_rate"] and sweep.acceptance["gronwall_domination"]
    record(acceptance_log, 4, ok,
           f"sq-err slope {sweep.sq_err_fit.slope:.3f} (>= 0.45), R2 {sweep.sq_err_fit.r_squared:.4f}; "
           f"domination {'holds' if sweep.acceptance['gronwall_domination'] else 'fails'}")
    assert ok


def test_c05_monotone_convergence(sweep, acceptance_log):
    ok = sweep.acceptance["monotone_convergence"]
    ref = sweep.metrics[-1]
    record(acceptance_log, 5, ok,
           f"all six metrics strictly decreasing over {len(sweep.metrics)} k; "
           f"k=0 sq_err={ref.sup_sq_err}, trace={ref.trace_integral}; "
           f"energy-functional check {'holds' if sweep.acceptance['energy_functional'] else 'fails'}")
    assert ok


def test_c06_energy_identity_order(shear_runs, grid, acceptance_log):
    cfls = sorted(shear_runs, reverse=True)
    vals = [shear_runs[c].ledger.integrated_residual() for c in cfls]
    orders = [float(np.log2(a / b)) for a, b in zip(vals, vals[1:])]
    ok = min(orders) >= 0.9
    record(acceptance_log, 6, ok,
           "shear run integrated |residual| " + ", ".join(f"{v:.3e}" for v in vals)
           + " orders " + ", ".join(f"{o:.3f}" for o in orders))
    assert ok


def test_c07_mass_conservation(sweep, shear_runs, acceptance_log):
    drifts = dict(sweep.mass_drift)
    for cfl, res in shear_runs.items():
        m = [r.mass for r in res.ledger.steps]
        drifts[f"shear cfl={cfl}"] = max(abs(x - m[0]) for x in m) / m[0]
    worst = max(drifts.values())
    ok = worst <= 1e-12
    record(acceptance_log, 7, ok, f"max relative mass drift {worst:.2e} over {len(drifts)} runs")
    assert ok


def test_c08_mms_order(acceptance_log):
    reps = {k: mms_verify((32, 64, 128), k=k, lame=LameParams(MU, 0.0)) for k in (0.0, 1.0)}
    ok = all(r.failure is None and r.u_order >= 1.7 for r in reps.values())
    record(acceptance_log, 8, ok, "velocity L2 order " + ", ".join(
        f"k={k:g}: {r.u_order:.3f} (density {r.rho_order:.3f})" for k, r in reps.items())
        + f" [{reps[0.0].variant} transport]")
    assert ok


def test_c09_dirichlet_coincidence(grid, acceptance_log):
    outs = list(np.linspace(0.0, T_FINAL, 11))
    lame = LameParams(MU, 0.0)
    a = run(INITIAL_DATA["default"](grid), PhysParams(lame, bc=SlipBC(0.0)), StepControl(), T_FINAL, outs)
    b = run(INITIAL_DATA["default"](grid), PhysParams(lame, bc=NoSlipBC()), StepControl(), T_FINAL, outs)
    same = (a.times == b.times and all(np.array_equal(x.u.values, y.u.values)
                                       and np.array_equal(x.rho.values, y.rho.values)
                                       for x, y in zip(a.trajectory, b.trajectory)))
    record(acceptance_log, 9, same, f"{len(a.trajectory)} snapshots bit-identical: {same}")
    assert same


NORMS = ("rho_h2", "rho_inv_linf", "u_h3")


def norm_ratios(report):
    return {n: max(v[n] for v in report.run_norms.values()) / min(v[n] for v in report.run_norms.values())
            for n in NORMS}


def test_c10_k_independence(sweep, grid, acceptance_log):
    ratios = norm_ratios(sweep)
    ok = all(r <= 2.0 for r in ratios.values())
    compat = friction_sweep(SweepSetup(grid, LameParams(MU, 0.0), t_final=T_FINAL, output_count=50,
                                       initial="compatible"), with_k_uniformity=False)
    c_ratios = norm_ratios(compat)
    record(acceptance_log, 10, ok,
           "max/min over sweep " + ", ".join(f"{n}={r:.3f}" for n, r in ratios.items())
           + " | diagnostic, slip-compatible data: " + ", ".join(f"{n}={r:.3f}" for n, r in c_ratios.items()))
    assert ok


def test_c11_shear_decay(shear_runs, acceptance_log):
    res = shear_runs[0.4]
    snap = next(s for s in res.trajectory if s.t == 0.1)
    measured = snap.u.values[0].max() / 0.01
    oracle = float(np.exp(-MU * np.pi ** 2 * 0.1))
    rel = abs(measured / oracle - 1)
    ok = rel <= 0.05
    record(acceptance_log, 11, ok, f"decay factor {measured:.5f} vs e^(-mu pi^2 t) = {oracle:.5f} (rel {rel:.2e})")
    assert ok
