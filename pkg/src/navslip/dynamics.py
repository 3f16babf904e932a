"""Coupled barotropic Navier-Stokes integrator on the slip channel.

One step is a Lie splitting: the density is transported with u^n, then the
velocity solves

    (rho^{n+1} I - dt L_h) u^{n+1} = rho^{n+1} u^n - dt [rho^{n+1} (u^n.grad) u^n + grad P(rho^{n+1})]

with the wall rows of :mod:`navslip.lame`. With ``picard_max > 1`` the density
update is redone with the averaged velocity and momentum re-solved until the
iterates settle. No-slip runs are the k = 0 case of the same code path.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, fields

import numpy as np

from . import lame as lame_mod
from .lame import LameParams, NoSlipBC, SlipBC, SolverError
from .mesh import (Grid, ScalarField, VectorField, boundary_trace_array, derivative_array,
                   inner, sobolev_norm_array)
from .transport import RHO_FLOOR, PositivityError, TransportScheme, continuity_update, total_mass_array

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PhysParams:
    lame: LameParams
    pressure_amp: float = 1.0
    gamma: float = 1.4
    bc: SlipBC | NoSlipBC = SlipBC(0.0)

    def __post_init__(self):
        if not self.pressure_amp > 0:
            raise ValueError(f"pressure amplitude must be > 0, got {self.pressure_amp}")
        if not self.gamma >= 1:
            raise ValueError(f"gamma must be >= 1, got {self.gamma}")

    @property
    def k(self) -> float:
        return self.bc.k

    def pressure(self, rho):
        return self.pressure_amp * rho ** self.gamma

    def sound_speed(self, rho):
        return np.sqrt(self.pressure_amp * self.gamma * rho ** (self.gamma - 1.0))


@dataclass(frozen=True)
class StepControl:
    cfl_factor: float = 0.4
    picard_max: int = 1
    picard_tol: float = 1e-10
    linear_tol: float = 1e-10
    rho_floor: float = RHO_FLOOR
    scheme: TransportScheme = TransportScheme()

    def __post_init__(self):
        if not 0 < self.cfl_factor <= 1:
            raise ValueError("cfl_factor must lie in (0, 1]")
        if self.picard_max < 1:
            raise ValueError("picard_max must be >= 1")
        for name in ("picard_tol", "linear_tol", "rho_floor"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True, eq=False)
class FluidState:
    rho: ScalarField
    u: VectorField
    t: float = 0.0
    rho_floor: float = field(default=RHO_FLOOR, repr=False)

    def __post_init__(self):
        if self.rho.grid != self.u.grid:
            raise ValueError("rho and u on different grids")
        if not np.all(self.rho.values > self.rho_floor):
            raise ValueError("density must exceed the vacuum floor everywhere")
        wall_un = np.abs(self.u.values[1][:, [0, -1]]).max()
        if wall_un > 1e-12:
            raise ValueError(f"normal velocity at the walls is {wall_un:.3e}")

    @property
    def grid(self) -> Grid:
        return self.rho.grid

    def __eq__(self, other):
        return (isinstance(other, FluidState) and self.t == other.t
                and self.rho == other.rho and self.u == other.u)


@dataclass
class LedgerRecord:
    t: float
    mass: float
    e_kin: float
    dissipation: float
    boundary_dissipation: float
    pressure_work: float
    energy_residual: float
    trace_accum: float
    u_h1: float = math.nan
    u_h2: float = math.nan
    u_h3: float = math.nan
    rho_h1: float = math.nan
    rho_h2: float = math.nan
    rho_inv_linf: float = math.nan
    ut_l2: float = math.nan
    # extras, not part of the CSV schema
    ut_h1: float = math.nan
    rho_t_l2: float = math.nan
    rho_l2_sq: float = math.nan
    u_l2_sq: float = math.nan
    grad_accum: float = 0.0
    dt: float = 0.0


CSV_COLUMNS = ("t", "mass", "e_kin", "dissipation", "boundary_dissipation", "pressure_work",
               "energy_residual", "trace_accum", "u_h1", "u_h2", "u_h3", "rho_h1", "rho_h2",
               "rho_inv_linf", "ut_l2")


@dataclass
class EnergyLedger:
    records: list[LedgerRecord] = field(default_factory=list)   # at output times
    steps: list[LedgerRecord] = field(default_factory=list)     # every step

    def column(self, name: str, per_step: bool = False) -> np.ndarray:
        rows = self.steps if per_step else self.records
        return np.array([getattr(r, name) for r in rows])

    def integrated_residual(self) -> float:
        return float(sum(abs(r.energy_residual) * r.dt for r in self.steps))

    def rows(self):
        for r in self.records:
            yield tuple(getattr(r, c) for c in CSV_COLUMNS)


# ---------------------------------------------------------------------------

def cfl_dt(state: FluidState, p: PhysParams, ctrl: StepControl) -> float:
    g = state.grid
    umax = float(np.sqrt((state.u.values ** 2).sum(axis=0)).max())
    cs = float(np.sqrt(p.pressure_amp * p.gamma * state.rho.values.max() ** (p.gamma - 1.0)))
    return ctrl.cfl_factor * min(g.hx, g.hz) / (umax + cs)


def convection_array(u: np.ndarray, grid: Grid) -> np.ndarray:
    """(u.grad) u with the mesh stencils."""
    ux, uz = u
    return np.stack([ux * derivative_array(c, grid, "x", 1) + uz * derivative_array(c, grid, "z", 1)
                     for c in u])


def pressure_gradient_array(rho: np.ndarray, grid: Grid, p: PhysParams) -> np.ndarray:
    P = p.pressure(rho)
    return np.stack([derivative_array(P, grid, "x", 1), derivative_array(P, grid, "z", 1)])


def momentum_rhs(rho_new: np.ndarray, u: np.ndarray, dt: float, grid: Grid, p: PhysParams,
                 source: np.ndarray | None = None) -> np.ndarray:
    rhs = rho_new * u - dt * (rho_new * convection_array(u, grid)
                              + pressure_gradient_array(rho_new, grid, p))
    if source is not None:
        rhs = rhs + dt * source
    return rhs


def momentum_step(rho_new: ScalarField, state: FluidState, dt: float, p: PhysParams,
                  ctrl: StepControl = StepControl(), source: np.ndarray | None = None) -> VectorField:
    if not np.all(rho_new.values > ctrl.rho_floor):
        raise PositivityError("density below floor entering momentum solve")
    g = state.grid
    rhs = momentum_rhs(rho_new.values, state.u.values, dt, g, p, source)
    return lame_mod.solve_implicit_momentum(rho_new.values, dt, VectorField(g, rhs), p.bc, p.lame,
                                            tol=ctrl.linear_tol, x0=state.u.values)


# ---------------------------------------------------------------------------
# energy bookkeeping

def kinetic_energy(rho: np.ndarray, u: np.ndarray, grid: Grid) -> float:
    return 0.5 * float(np.sum(rho * (u * u).sum(axis=0) * grid.weights))


def boundary_dissipation(u: np.ndarray, grid: Grid, bc) -> float:
    """(1/k) * wall trace; zero when k = 0 since the wall velocity vanishes."""
    if bc.k == 0:
        return 0.0
    return boundary_trace_array(u, grid) / bc.k


def viscous_dissipation(u: np.ndarray, grid: Grid, p: PhysParams) -> float:
    """Discrete form of mu|grad u|^2 + lam(div u)^2.

    Taken as -<L_h u, u> over interior nodes minus the boundary dissipation,
    the summation-by-parts partner of the momentum operator.
    """
    Lu = lame_mod.lame_array(u, grid, p.lame)
    return -inner(Lu, u, grid, "interior") - boundary_dissipation(u, grid, p.bc)


def pressure_work(rho: np.ndarray, u: np.ndarray, grid: Grid, p: PhysParams) -> float:
    return inner(pressure_gradient_array(rho, grid, p), u, grid, "interior")


def grad_sq(u: np.ndarray, grid: Grid) -> float:
    return float(sum(np.sum((derivative_array(c, grid, a, 1) ** 2) * grid.weights)
                     for c in u for a in ("x", "z")))


def _record(t, rho, u, grid, p, e_prev, dt, trace_prev, grad_prev) -> LedgerRecord:
    e = kinetic_energy(rho, u, grid)
    d = viscous_dissipation(u, grid, p)
    b = boundary_dissipation(u, grid, p.bc)
    pw = pressure_work(rho, u, grid, p)
    res = 0.0 if dt == 0 else (e - e_prev) / dt + d + b + pw
    return LedgerRecord(
        t=t, mass=total_mass_array(rho, grid), e_kin=e, dissipation=d, boundary_dissipation=b,
        pressure_work=pw, energy_residual=res,
        trace_accum=trace_prev + dt * boundary_trace_array(u, grid),
        rho_l2_sq=float(np.sum(rho * rho * grid.weights)),
        u_l2_sq=float(np.sum(u * u * grid.weights)),
        grad_accum=grad_prev + dt * grad_sq(u, grid), dt=dt)


def _fill_norms(rec: LedgerRecord, state: FluidState, prev: FluidState | None):
    g = state.grid
    u, rho = state.u.values, state.rho.values
    rec.u_h1 = sobolev_norm_array(u, g, 1)
    rec.u_h2 = sobolev_norm_array(u, g, 2)
    rec.u_h3 = sobolev_norm_array(u, g, 3)
    rec.rho_h1 = sobolev_norm_array(rho, g, 1)
    rec.rho_h2 = sobolev_norm_array(rho, g, 2)
    rec.rho_inv_linf = float((1.0 / rho).max())
    if prev is not None and state.t > prev.t:
        h = state.t - prev.t
        ut = (u - prev.u.values) / h
        rec.ut_l2 = sobolev_norm_array(ut, g, 0)
        rec.ut_h1 = sobolev_norm_array(ut, g, 1)
        rec.rho_t_l2 = sobolev_norm_array((rho - prev.rho.values) / h, g, 0)
    else:
        rec.ut_l2 = rec.ut_h1 = rec.rho_t_l2 = 0.0


def initial_record(state: FluidState, p: PhysParams) -> LedgerRecord:
    rec = _record(state.t, state.rho.values, state.u.values, state.grid, p, 0.0, 0.0, 0.0, 0.0)
    _fill_norms(rec, state, None)
    return rec


# ---------------------------------------------------------------------------

class Forcing:
    """Source hooks, used only for manufactured-solution runs.

    ``mass(t0, t1)`` is added as dt*source to the density update and
    ``momentum(t0, t1)`` as dt*source to the momentum right-hand side.
    """

    def mass(self, t0: float, t1: float) -> np.ndarray | None:
        return None

    def momentum(self, t0: float, t1: float) -> np.ndarray | None:
        return None


def step(state: FluidState, p: PhysParams, ctrl: StepControl = StepControl(),
         dt: float | None = None, forcing: Forcing | None = None,
         prev_record: LedgerRecord | None = None) -> tuple[FluidState, LedgerRecord]:
    """Advance one step; ``dt`` defaults to the CFL step."""
    g = state.grid
    if dt is None:
        dt = cfl_dt(state, p, ctrl)
    t0, t1 = state.t, state.t + dt
    m_src = forcing.mass(t0, t1) if forcing else None
    u_src = forcing.momentum(t0, t1) if forcing else None
    rho0, u0 = state.rho.values, state.u.values
    variant = ctrl.scheme.variant

    rho1 = continuity_update(rho0, u0, dt, g, variant, ctrl.rho_floor, m_src)
    u1 = momentum_step(ScalarField(g, rho1), state, dt, p, ctrl, u_src).values
    for _ in range(1, ctrl.picard_max):
        rho_next = continuity_update(rho0, 0.5 * (u0 + u1), dt, g, variant, ctrl.rho_floor, m_src)
        u_next = momentum_step(ScalarField(g, rho_next), state, dt, p, ctrl, u_src).values
        change = sobolev_norm_array(u_next - u1, g, 0) + sobolev_norm_array(rho_next - rho1, g, 0)
        rho1, u1 = rho_next, u_next
        if change < ctrl.picard_tol:
            break

    new = FluidState(ScalarField(g, rho1), VectorField(g, u1), t1, ctrl.rho_floor)
    if prev_record is None:
        prev_record = _record(t0, rho0, u0, g, p, 0.0, 0.0, 0.0, 0.0)
    rec = _record(t1, rho1, u1, g, p, prev_record.e_kin, dt, prev_record.trace_accum,
                  prev_record.grad_accum)
    return new, rec


@dataclass
class RunResult:
    trajectory: list[FluidState]
    ledger: EnergyLedger
    blow_up: bool = False
    failure: str | None = None
    t_end: float = 0.0

    @property
    def times(self) -> list[float]:
        return [s.t for s in self.trajectory]


def _snap_tol(t_final: float) -> float:
    return 1e-12 * max(1.0, t_final)


def run(initial: FluidState, p: PhysParams, ctrl: StepControl, t_final: float,
        output_times=None, forcing: Forcing | None = None,
        dt_policy=None) -> RunResult:
    """Integrate to ``t_final``, landing exactly on each output time.

    ``dt_policy(state)`` overrides the CFL step (used for fixed-dt studies).
    On a positivity or solver failure the partial trajectory is returned
    with ``blow_up`` set.
    """
    if t_final < 0:
        raise ValueError("t_final must be >= 0")
    if output_times is None:
        output_times = [0.0, t_final]
    outs = [float(t) for t in output_times]
    if any(b < a for a, b in zip(outs, outs[1:])):
        raise ValueError("output_times must be sorted")
    if outs and (outs[0] < 0 or outs[-1] > t_final + _snap_tol(t_final)):
        raise ValueError("output_times must lie in [0, t_final]")

    ledger = EnergyLedger()
    trajectory: list[FluidState] = []
    state = initial
    rec = initial_record(state, p)
    pending = [t for t in outs if t > state.t + _snap_tol(t_final)]
    if len(pending) < len(outs):
        trajectory.append(state)
        ledger.records.append(rec)
    prev_state = state
    result = RunResult(trajectory, ledger, t_end=state.t)

    while pending:
        target = pending[0]
        dt = dt_policy(state) if dt_policy else cfl_dt(state, p, ctrl)
        if state.t + dt >= target - _snap_tol(t_final):
            dt = target - state.t
        try:
            new, rec = step(state, p, ctrl, dt, forcing, rec)
        except (PositivityError, SolverError) as exc:
            log.warning("run halted at t=%.6g: %s", state.t, exc)
            result.blow_up = True
            result.failure = f"{type(exc).__name__} at t={state.t:.6g}: {exc}"
            break
        if abs(new.t - target) <= _snap_tol(t_final):
            new = FluidState(new.rho, new.u, target, ctrl.rho_floor)
            rec.t = target
        ledger.steps.append(rec)
        prev_state, state = state, new
        result.t_end = state.t
        if state.t == target:
            pending.pop(0)
            _fill_norms(rec, state, prev_state)
            trajectory.append(state)
            ledger.records.append(rec)
    return result


# ---------------------------------------------------------------------------
# standard initial data

def default_initial(grid: Grid, amplitude: float = 0.5) -> FluidState:
    """rho0 = 1 + 0.1 cos(2 pi x/lx), u0 = (a sin(pi z)(1 + 0.1 cos(2 pi x/lx)), 0)."""
    c = np.cos(2 * np.pi * grid.X / grid.lx)
    rho = 1.0 + 0.1 * c
    ux = amplitude * np.sin(np.pi * grid.Z) * (1.0 + 0.1 * c)
    ux[:, [0, -1]] = 0.0   # sin(pi) is not exactly zero in floating point
    return FluidState(ScalarField(grid, rho), VectorField(grid, np.stack([ux, np.zeros(grid.shape)])))


def shear_initial(grid: Grid, amplitude: float = 0.01) -> FluidState:
    ux = amplitude * np.sin(np.pi * grid.Z)
    ux[:, [0, -1]] = 0.0
    return FluidState(ScalarField(grid, np.ones(grid.shape)),
                      VectorField(grid, np.stack([np.array(ux, dtype=float), np.zeros(grid.shape)])))


def compatible_initial(grid: Grid, amplitude: float = 0.5) -> FluidState:
    """Same density as ``default_initial``; u0 = (a sin^2(pi z)(1 + 0.1 cos(2 pi x/lx)), 0).

    Both u0 and its wall-normal derivative vanish on the walls, so the data
    satisfy the slip condition for every k as well as the no-slip one.
    """
    c = np.cos(2 * np.pi * grid.X / grid.lx)
    rho = 1.0 + 0.1 * c
    ux = amplitude * np.sin(np.pi * grid.Z) ** 2 * (1.0 + 0.1 * c)
    ux[:, [0, -1]] = 0.0
    return FluidState(ScalarField(grid, rho), VectorField(grid, np.stack([ux, np.zeros(grid.shape)])))


def equilibrium_initial(grid: Grid) -> FluidState:
    return FluidState(ScalarField(grid, np.ones(grid.shape)), VectorField(grid, np.zeros((2, *grid.shape))))


INITIAL_DATA = {"default": default_initial, "compatible": compatible_initial,
                "shear": shear_initial, "equilibrium": equilibrium_initial}


def compatibility_defect(state: FluidState, k: float, mu: float) -> float:
    """Max wall residual of the slip row k mu D_n(u_x) + u_x = 0 and of u_z = 0.

    Zero (up to stencil error) means the data satisfy the boundary condition
    at t = 0, so no initial layer forms.
    """
    g = state.grid
    ux, uz = state.u.values
    c = k * mu / (2 * g.hz)
    lo = (1 + 3 * c) * ux[:, 0] - 4 * c * ux[:, 1] + c * ux[:, 2]
    hi = (1 + 3 * c) * ux[:, -1] - 4 * c * ux[:, -2] + c * ux[:, -3]
    return float(max(np.abs(lo).max(), np.abs(hi).max(), np.abs(uz[:, [0, -1]]).max()))


def m0_value(state: FluidState, p: PhysParams | None = None) -> float:
    """E_kin(0) + 0.5 |rho0|_L2^2, the energy level bounding the wall trace."""
    g = state.grid
    return (kinetic_energy(state.rho.values, state.u.values, g)
            + 0.5 * sobolev_norm_array(state.rho.values, g, 0) ** 2)


def record_fields() -> list[str]:
    return [f.name for f in fields(LedgerRecord)]
