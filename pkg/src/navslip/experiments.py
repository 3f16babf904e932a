"""Friction sweep: no-slip reference vs Navier-slip runs over a ladder of k.

For each k > 0 the slip run is compared with the k = 0 run started from the
same data, through w = u - u_ref and phi = rho - rho_ref at the shared output
times, plus the accumulated wall trace and the energy functional

    E(t) = sup_{s<=t} int(|u|^2 + rho^2) + int_0^t int |grad u|^2.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .dynamics import (INITIAL_DATA, FluidState, PhysParams, RunResult, StepControl, m0_value,
                       run)
from .lame import KUniformityReport, LameParams, SlipBC, k_uniformity_report
from .mesh import Grid, VectorField, sobolev_norm_array

log = logging.getLogger(__name__)

SQ_ERR_SLOPE_MIN = 0.45
TRACE_SLOPE_MIN = 0.9
R2_MIN = 0.95
TRACE_SLACK = 1.2
K_INDEPENDENCE_MAX = 2.0
INTERP_RATIO_MIN = 2.0 / 3.0 - 0.1
ENERGY_GAP_REL = 1e-3


# ---------------------------------------------------------------------------
# rate fitting

@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    r_squared: float
    points: int

    def to_dict(self) -> dict:
        return {"slope": self.slope, "intercept": self.intercept, "r2": self.r_squared}


def fit_rate(points) -> RateFit:
    """Least-squares line through (log k, log value)."""
    pts = [(float(k), float(v)) for k, v in points]
    if len(pts) < 3:
        raise ValueError(f"need at least 3 points, got {len(pts)}")
    if any(not (k > 0 and v > 0) or not (math.isfinite(k) and math.isfinite(v)) for k, v in pts):
        raise ValueError("rate fit needs finite positive k and values")
    if len({k for k, _ in pts}) < 2:
        raise ValueError("rate fit needs at least 2 distinct k")
    x = np.log([k for k, _ in pts])
    y = np.log([v for _, v in pts])
    slope, intercept = np.polyfit(x, y, 1)
    ss_res = float(np.sum((y - (slope * x + intercept)) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot <= 1e-300:
        r2 = 1.0
    else:
        r2 = min(1.0, max(0.0, 1.0 - ss_res / ss_tot))
    slope = 0.0 if abs(slope) < 1e-14 else float(slope)
    return RateFit(slope, float(intercept), r2, len(pts))


def fit_rate_resolution(h, errors) -> float:
    """Observed order: least-squares slope of log(error) against log(h)."""
    return fit_rate(list(zip(h, errors))).slope


# ---------------------------------------------------------------------------
# pointwise comparison

@dataclass(frozen=True)
class StateComparison:
    t: float
    w_l2: float
    w_h1: float
    w_h3: float
    phi_l2: float

    @property
    def sq_err(self) -> float:
        return self.w_l2 ** 2 + self.phi_l2 ** 2


def compare_states(a: FluidState, b: FluidState) -> StateComparison:
    if a.grid != b.grid:
        raise ValueError("states live on different grids")
    if a.t != b.t:
        raise ValueError(f"states at different times ({a.t} vs {b.t})")
    g = a.grid
    w = a.u.values - b.u.values
    phi = a.rho.values - b.rho.values
    return StateComparison(a.t, sobolev_norm_array(w, g, 0), sobolev_norm_array(w, g, 1),
                           sobolev_norm_array(w, g, 3), sobolev_norm_array(phi, g, 0))


def energy_functional_series(result: RunResult, t_max: float = math.inf) -> tuple[np.ndarray, np.ndarray]:
    """E(t) at each output time <= t_max."""
    recs = [r for r in result.ledger.records if r.t <= t_max]
    t = np.array([r.t for r in recs])
    mass_part = np.maximum.accumulate(np.array([r.u_l2_sq + r.rho_l2_sq for r in recs]))
    return t, mass_part + np.array([r.grad_accum for r in recs])


# ---------------------------------------------------------------------------
# sweep

@dataclass(frozen=True)
class SweepSetup:
    grid: Grid
    lame: LameParams = LameParams(0.1, 0.0)
    pressure_amp: float = 1.0
    gamma: float = 1.4
    ctrl: StepControl = StepControl()
    t_final: float = 0.5
    output_count: int = 50
    initial: str = "default"

    @property
    def output_times(self) -> list[float]:
        return list(np.linspace(0.0, self.t_final, self.output_count + 1))

    def phys(self, k: float) -> PhysParams:
        return PhysParams(self.lame, self.pressure_amp, self.gamma, SlipBC(k))

    def initial_state(self) -> FluidState:
        return INITIAL_DATA[self.initial](self.grid)


DEFAULT_K_LIST = (0.0, 1e-3, 3e-3, 1e-2, 3e-2, 1e-1, 3e-1, 1.0)


@dataclass
class ComparisonMetrics:
    k: float
    sup_sq_err: float
    sup_w_l2: float
    sup_phi_l2: float
    sup_w_h1: float
    trace_integral: float
    energy_gap: float
    sup_w_h3: float = 0.0

    COMPARED = ("sup_sq_err", "sup_w_l2", "sup_phi_l2", "sup_w_h1", "trace_integral", "energy_gap")

    def to_dict(self) -> dict:
        return {"k": self.k, **{name: getattr(self, name) for name in self.COMPARED}}


@dataclass
class InterpolationReport:
    sigma: float
    l2_slope: float | None
    h1_slope: float | None
    bound_slope: float | None
    ratio: float | None
    passed: bool

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class SweepReport:
    metrics: list[ComparisonMetrics]
    sq_err_fit: RateFit | None
    trace_fit: RateFit | None
    monotone: bool
    k_uniformity: KUniformityReport | None
    acceptance: dict[str, bool]
    m0: float
    t_star: float
    blow_up: bool = False
    interpolation: InterpolationReport | None = None
    run_norms: dict[float, dict[str, float]] = field(default_factory=dict)
    mass_drift: dict[float, float] = field(default_factory=dict)
    reference_energy: float = 0.0
    runs: dict[float, RunResult] = field(default_factory=dict, repr=False)

    @property
    def passed(self) -> bool:
        return all(self.acceptance.values())

    def to_json_dict(self, config_echo: dict | None = None) -> dict:
        fits = {}
        if self.sq_err_fit is not None:
            fits["sq_err"] = self.sq_err_fit.to_dict()
        if self.trace_fit is not None:
            fits["trace"] = self.trace_fit.to_dict()
        return {
            "config_echo": config_echo or {},
            "metrics": [m.to_dict() for m in self.metrics],
            "fits": fits,
            "k_uniformity": {"max_min_ratio": (self.k_uniformity.max_min_ratio
                                               if self.k_uniformity else 1.0)},
            "acceptance": dict(self.acceptance),
            "t_star": self.t_star,
        }


def _run_for_k(setup: SweepSetup, k: float) -> RunResult:
    return run(setup.initial_state(), setup.phys(k), setup.ctrl, setup.t_final, setup.output_times)


def _strictly_decreasing_in_k(ks: list[float], values: list[float]) -> bool:
    """True if values fall strictly as k falls (ks given in descending order)."""
    return all(b < a for a, b in zip(values, values[1:]))


def gronwall_domination(ks, sq_errs, m0: float) -> tuple[bool, float]:
    """Calibrate C on the largest k so C*(m0 k + sqrt(m0 k)) matches it; check all smaller k."""
    ks = np.asarray(ks, dtype=float)
    errs = np.asarray(sq_errs, dtype=float)
    bound = m0 * ks + np.sqrt(m0 * ks)
    i = int(np.argmax(ks))
    c_fit = errs[i] / bound[i]
    return bool(np.all(errs <= c_fit * bound * (1 + 1e-12))), float(c_fit)


def interpolation_from_norms(ks, l2, h1, h3, s1: float = 1.0) -> InterpolationReport:
    """Compare the measured H^s1 decay with the interpolation bound L2^sigma H3^(1-sigma)."""
    sigma = 1.0 - s1 / 3.0
    ks, l2, h1, h3 = (np.asarray(a, dtype=float) for a in (ks, l2, h1, h3))
    keep = (ks > 0) & (l2 > 0) & (h1 > 0)
    if keep.sum() < 3:
        # nothing to fit, e.g. an identically zero error series
        return InterpolationReport(sigma, None, None, None, None, bool(np.all(h1 == 0)))
    pts = lambda v: list(zip(ks[keep], v[keep]))  # noqa: E731
    l2_fit = fit_rate(pts(l2))
    h1_fit = fit_rate(pts(h1))
    bound = l2 ** sigma * h3 ** (1.0 - sigma)
    bound_slope = fit_rate(pts(bound)).slope if np.all(bound[keep] > 0) else None
    ratio = h1_fit.slope / l2_fit.slope if l2_fit.slope != 0 else None
    passed = ratio is not None and ratio >= sigma - 0.1
    return InterpolationReport(sigma, l2_fit.slope, h1_fit.slope, bound_slope, ratio, passed)


def interpolation_report(w_series, s1: int = 1) -> InterpolationReport:
    """``w_series``: iterable of (k, VectorField) differences; s1 in {1, 2}."""
    if s1 not in (1, 2):
        raise ValueError("s1 must be 1 or 2")
    ks, l2, h1, h3 = [], [], [], []
    for k, w in w_series:
        g = w.grid
        ks.append(k)
        l2.append(sobolev_norm_array(w.values, g, 0))
        h1.append(sobolev_norm_array(w.values, g, int(s1)))
        h3.append(sobolev_norm_array(w.values, g, 3))
    return interpolation_from_norms(ks, l2, h1, h3, s1)


def friction_sweep(setup: SweepSetup, k_list=DEFAULT_K_LIST, threads: int = 1,
                   with_k_uniformity: bool = True) -> SweepReport:
    ks = sorted({float(k) for k in k_list}, reverse=True)
    if 0.0 not in ks:
        raise ValueError("k_list must contain the no-slip reference k = 0")
    if any(k < 0 for k in ks):
        raise ValueError("k values must be >= 0")

    if threads > 1 and len(ks) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = dict(zip(ks, pool.map(_run_for_k, [setup] * len(ks), ks)))
    else:
        results = {k: _run_for_k(setup, k) for k in ks}

    ref = results[0.0]
    first_out = setup.output_times[1] if setup.output_count >= 1 else 0.0
    for k, res in results.items():
        if res.blow_up and res.t_end < first_out:
            raise RuntimeError(f"run k={k} failed before the first output time: {res.failure}")
    blow_up = any(r.blow_up for r in results.values())
    t_star = min(r.t_end for r in results.values()) if blow_up else setup.t_final

    s0 = setup.initial_state()
    m0 = m0_value(s0)
    ref_by_t = {s.t: s for s in ref.trajectory if s.t <= t_star}
    ref_t, ref_E = energy_functional_series(ref, t_star)

    metrics: list[ComparisonMetrics] = []
    run_norms: dict[float, dict[str, float]] = {}
    mass_drift: dict[float, float] = {}
    for k in ks:
        res = results[k]
        comps = [compare_states(s, ref_by_t[s.t]) for s in res.trajectory if s.t in ref_by_t]
        trace = max((r.trace_accum for r in res.ledger.steps if r.t <= t_star), default=0.0)
        _, E = energy_functional_series(res, t_star)
        n = min(len(E), len(ref_E))
        metrics.append(ComparisonMetrics(
            k=k,
            sup_sq_err=max(c.sq_err for c in comps),
            sup_w_l2=max(c.w_l2 for c in comps),
            sup_phi_l2=max(c.phi_l2 for c in comps),
            sup_w_h1=max(c.w_h1 for c in comps),
            trace_integral=trace,
            energy_gap=float(np.max(np.abs(E[:n] - ref_E[:n]))),
            sup_w_h3=max(c.w_h3 for c in comps)))
        recs = [r for r in res.ledger.records if r.t <= t_star]
        run_norms[k] = {name: max(getattr(r, name) for r in recs)
                        for name in ("rho_h2", "rho_inv_linf", "u_h3", "ut_h1", "rho_t_l2")}
        masses = [r.mass for r in res.ledger.steps] or [recs[0].mass]
        mass_drift[k] = max(abs(m - recs[0].mass) for m in masses) / recs[0].mass

    positive = [m for m in metrics if m.k > 0]
    sq_fit = trace_fit = None
    if len(positive) >= 3:
        # identically zero differences (e.g. rest state) admit no power-law fit
        if all(m.sup_sq_err > 0 for m in positive):
            sq_fit = fit_rate([(m.k, m.sup_sq_err) for m in positive])
        if all(m.trace_integral > 0 for m in positive):
            trace_fit = fit_rate([(m.k, m.trace_integral) for m in positive])

    zero = metrics[-1]
    zero_ok = all(getattr(zero, name) == 0.0 for name in ComparisonMetrics.COMPARED)
    monotone = zero_ok and all(
        _strictly_decreasing_in_k(ks, [getattr(m, name) for m in metrics])
        for name in ComparisonMetrics.COMPARED)

    ku = None
    if with_k_uniformity:
        g = VectorField(setup.grid, s0.rho.values * s0.u.values)
        ku = k_uniformity_report(g, setup.lame, ks)

    acceptance: dict[str, bool] = {}
    acceptance["trace_bound"] = all(m.trace_integral <= TRACE_SLACK * m.k * m0 for m in metrics)
    if trace_fit is not None:
        acceptance["trace_rate"] = trace_fit.slope >= TRACE_SLOPE_MIN and trace_fit.r_squared >= R2_MIN
    if sq_fit is not None:
        acceptance["sq_err_rate"] = sq_fit.slope >= SQ_ERR_SLOPE_MIN and sq_fit.r_squared >= R2_MIN
        acceptance["gronwall_domination"] = gronwall_domination(
            [m.k for m in positive], [m.sup_sq_err for m in positive], m0)[0]
    acceptance["monotone_convergence"] = monotone
    ref_energy = float(ref_E[-1]) if len(ref_E) else 0.0
    if positive:
        gaps = [m.energy_gap for m in metrics]
        acceptance["energy_functional"] = (_strictly_decreasing_in_k(ks, gaps)
                                           and positive[-1].energy_gap < ENERGY_GAP_REL * ref_energy)
    acceptance["mass_conservation"] = all(d <= 1e-12 for d in mass_drift.values())
    if len(ks) > 1:
        acceptance["k_independence"] = all(
            max(n[name] for n in run_norms.values()) <= K_INDEPENDENCE_MAX * min(n[name] for n in run_norms.values())
            for name in ("rho_h2", "rho_inv_linf", "u_h3"))
    if ku is not None:
        acceptance["k_uniformity"] = ku.passed

    interp = None
    if sq_fit is not None:
        interp = interpolation_from_norms([m.k for m in positive], [m.sup_w_l2 for m in positive],
                                          [m.sup_w_h1 for m in positive], [m.sup_w_h3 for m in positive])
        acceptance["interpolation"] = interp.passed

    return SweepReport(metrics=metrics, sq_err_fit=sq_fit, trace_fit=trace_fit, monotone=monotone,
                       k_uniformity=ku, acceptance=acceptance, m0=m0, t_star=t_star, blow_up=blow_up,
                       interpolation=interp, run_norms=run_norms, mass_drift=mass_drift,
                       reference_energy=ref_energy, runs=results)
