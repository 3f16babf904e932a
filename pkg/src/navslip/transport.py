"""Conservative density update for rho_t + div(rho u) = 0.

Each node owns a dual cell [x_i -+ hx/2] x [z_j -+ hz/2] clipped to the
channel, so wall cells have half height and the cell volumes are exactly the
trapezoidal weights of :mod:`navslip.mesh`. Fluxes through the walls are
identically zero, which makes total mass telescopically conserved.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mesh import Grid, ScalarField, VectorField

RHO_FLOOR = 1e-8
VARIANTS = ("upwind1", "muscl_minmod")


class PositivityError(RuntimeError):
    """Density fell to the vacuum floor; the run has left the smooth regime."""


@dataclass(frozen=True)
class TransportScheme:
    variant: str = "upwind1"

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown transport variant {self.variant!r}; expected one of {VARIANTS}")


def total_mass_array(rho: np.ndarray, grid: Grid) -> float:
    return float(np.sum(rho * grid.weights))


def total_mass(rho: ScalarField) -> float:
    return total_mass_array(rho.values, rho.grid)


def _minmod(a, b):
    return np.where(a * b > 0, np.sign(a) * np.minimum(np.abs(a), np.abs(b)), 0.0)


def _face_states_x(rho, variant):
    """Left/right states at faces i+1/2 (periodic)."""
    right_nb = np.roll(rho, -1, axis=0)
    if variant == "upwind1":
        return rho, right_nb
    slope = _minmod(rho - np.roll(rho, 1, axis=0), right_nb - rho)
    return rho + 0.5 * slope, right_nb - 0.5 * np.roll(slope, -1, axis=0)


def _face_states_z(rho, variant):
    """Left/right states at interior faces j+1/2, j = 0..nz-1."""
    lo, hi = rho[:, :-1], rho[:, 1:]
    if variant == "upwind1":
        return lo, hi
    slope = np.zeros_like(rho)
    slope[:, 1:-1] = _minmod(rho[:, 1:-1] - rho[:, :-2], rho[:, 2:] - rho[:, 1:-1])
    return lo + 0.5 * slope[:, :-1], hi - 0.5 * slope[:, 1:]


def flux_divergence(rho: np.ndarray, u: np.ndarray, grid: Grid, variant: str = "upwind1") -> np.ndarray:
    """Finite-volume div(rho u) per unit cell volume."""
    ux, uz = u
    fx_vel = 0.5 * (ux + np.roll(ux, -1, axis=0))
    left, right = _face_states_x(rho, variant)
    fx = np.where(fx_vel >= 0, fx_vel * left, fx_vel * right)

    fz_vel = 0.5 * (uz[:, :-1] + uz[:, 1:])
    lo, hi = _face_states_z(rho, variant)
    fz = np.where(fz_vel >= 0, fz_vel * lo, fz_vel * hi)
    fz_all = np.zeros((grid.nx, grid.nz + 2))
    fz_all[:, 1:-1] = fz               # wall faces carry no flux

    height = np.full(grid.nz + 1, grid.hz)
    height[0] = height[-1] = 0.5 * grid.hz
    div = (fx - np.roll(fx, 1, axis=0)) / grid.hx
    div = div + (fz_all[:, 1:] - fz_all[:, :-1]) / height[None, :]
    return div


def continuity_update(rho: np.ndarray, u: np.ndarray, dt: float, grid: Grid,
                      variant: str = "upwind1", rho_floor: float = RHO_FLOOR,
                      source: np.ndarray | None = None) -> np.ndarray:
    wall_un = np.abs(u[1][:, [0, -1]]).max()
    if wall_un > 1e-12:
        raise ValueError(f"normal velocity at walls is {wall_un:.3e}; need n.u = 0")
    if not np.all(rho > 0):
        raise PositivityError("input density is not strictly positive")
    if not np.any(u):
        out = rho.copy()
    else:
        out = rho - dt * flux_divergence(rho, u, grid, variant)
    if source is not None:
        out = out + dt * source
    lo = float(out.min())
    if not np.isfinite(lo) or lo <= rho_floor:
        raise PositivityError(f"density reached {lo:.3e} (floor {rho_floor:g})")
    return out


def continuity_step(rho: ScalarField, u: VectorField, dt: float,
                    scheme: TransportScheme = TransportScheme(),
                    rho_floor: float = RHO_FLOOR) -> ScalarField:
    if rho.grid != u.grid:
        raise ValueError("density and velocity live on different grids")
    return ScalarField(rho.grid, continuity_update(rho.values, u.values, dt, rho.grid,
                                                   scheme.variant, rho_floor))
