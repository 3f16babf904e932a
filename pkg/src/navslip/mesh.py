"""Periodic channel grid, finite-difference stencils, discrete Sobolev norms.

The domain is T_lx x [0, 1]: periodic in x, walls at z = 0 and z = 1.
Nodes sit at x_i = i*hx (i < nx) and z_j = j*hz (j <= nz). Scalar data are
arrays of shape ``(nx, nz + 1)``; vector data ``(2, nx, nz + 1)`` with
component 0 tangential (x) and component 1 wall-normal (z).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import sparse


@dataclass(frozen=True)
class Grid:
    lx: float
    nx: int
    nz: int
    dim: int = 2

    def __post_init__(self):
        if self.dim != 2:
            raise ValueError("only dim=2 channels are supported")
        if not (np.isfinite(self.lx) and self.lx > 0):
            raise ValueError(f"lx must be positive, got {self.lx}")
        if int(self.nx) != self.nx or int(self.nz) != self.nz:
            raise ValueError("node counts must be integers")
        if self.nx < 4 or self.nz < 4:
            raise ValueError(f"need nx >= 4 and nz >= 4, got nx={self.nx}, nz={self.nz}")

    @property
    def hx(self) -> float:
        return self.lx / self.nx

    @property
    def hz(self) -> float:
        return 1.0 / self.nz

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nx, self.nz + 1)

    @property
    def node_count(self) -> int:
        return self.nx * (self.nz + 1)

    @property
    def area(self) -> float:
        return self.lx

    @cached_property
    def x(self) -> np.ndarray:
        return np.arange(self.nx) * self.hx

    @cached_property
    def z(self) -> np.ndarray:
        return np.arange(self.nz + 1) * self.hz

    @cached_property
    def X(self) -> np.ndarray:
        return np.broadcast_to(self.x[:, None], self.shape)

    @cached_property
    def Z(self) -> np.ndarray:
        return np.broadcast_to(self.z[None, :], self.shape)

    @cached_property
    def weights(self) -> np.ndarray:
        """Trapezoidal quadrature weights (half weight on wall nodes)."""
        wz = np.full(self.nz + 1, self.hz)
        wz[0] = wz[-1] = 0.5 * self.hz
        return np.broadcast_to(self.hx * wz[None, :], self.shape)

    @cached_property
    def interior(self) -> np.ndarray:
        mask = np.ones(self.shape, dtype=bool)
        mask[:, 0] = mask[:, -1] = False
        return mask

    def normal(self, wall: int) -> tuple[float, float]:
        """Outward unit normal at wall 0 (z=0) or wall 1 (z=1)."""
        return (0.0, -1.0) if wall == 0 else (0.0, 1.0)

    def tangent(self) -> tuple[float, float]:
        return (1.0, 0.0)

    def wall_index(self, wall: int) -> int:
        return 0 if wall == 0 else self.nz


def build_grid(lx: float, nx: int, nz: int) -> Grid:
    return Grid(float(lx), int(nx), int(nz))


def _check_values(values: np.ndarray, shape: tuple[int, ...]):
    if values.shape != shape:
        raise ValueError(f"field shape {values.shape} does not match grid shape {shape}")
    if not np.all(np.isfinite(values)):
        raise ValueError("field contains non-finite values")


@dataclass(frozen=True, eq=False)
class ScalarField:
    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        _check_values(self.values, self.grid.shape)

    def __eq__(self, other):
        return (isinstance(other, ScalarField) and self.grid == other.grid
                and np.array_equal(self.values, other.values))


@dataclass(frozen=True, eq=False)
class VectorField:
    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        _check_values(self.values, (self.grid.dim, *self.grid.shape))

    def __eq__(self, other):
        return (isinstance(other, VectorField) and self.grid == other.grid
                and np.array_equal(self.values, other.values))

    @property
    def tangential(self) -> np.ndarray:
        return self.values[0]

    @property
    def normal(self) -> np.ndarray:
        return self.values[1]


def scalar(grid: Grid, fn_or_value) -> ScalarField:
    """Sample ``fn(X, Z)`` (or a constant) on the grid nodes."""
    if callable(fn_or_value):
        vals = np.asarray(fn_or_value(grid.X, grid.Z), dtype=float)
        vals = np.broadcast_to(vals, grid.shape).copy()
    else:
        vals = np.full(grid.shape, float(fn_or_value))
    return ScalarField(grid, vals)


def vector(grid: Grid, fx, fz=0.0) -> VectorField:
    return VectorField(grid, np.stack([scalar(grid, fx).values, scalar(grid, fz).values]))


# ---------------------------------------------------------------------------
# array-level stencils

def dx1(f: np.ndarray, h: float) -> np.ndarray:
    """Centered periodic first difference along the first array axis."""
    return (np.roll(f, -1, axis=0) - np.roll(f, 1, axis=0)) / (2.0 * h)


def dx2(f: np.ndarray, h: float) -> np.ndarray:
    return (np.roll(f, -1, axis=0) - 2.0 * f + np.roll(f, 1, axis=0)) / (h * h)


def dz1(f: np.ndarray, h: float) -> np.ndarray:
    """First difference along the last axis: centered inside, 3-point one-sided at walls."""
    out = np.empty_like(f)
    out[..., 1:-1] = (f[..., 2:] - f[..., :-2]) / (2.0 * h)
    out[..., 0] = (-3.0 * f[..., 0] + 4.0 * f[..., 1] - f[..., 2]) / (2.0 * h)
    out[..., -1] = (3.0 * f[..., -1] - 4.0 * f[..., -2] + f[..., -3]) / (2.0 * h)
    return out


def dz2(f: np.ndarray, h: float) -> np.ndarray:
    """Second difference along the last axis: centered inside, 4-point one-sided at walls."""
    out = np.empty_like(f)
    out[..., 1:-1] = (f[..., 2:] - 2.0 * f[..., 1:-1] + f[..., :-2]) / (h * h)
    out[..., 0] = (2.0 * f[..., 0] - 5.0 * f[..., 1] + 4.0 * f[..., 2] - f[..., 3]) / (h * h)
    out[..., -1] = (2.0 * f[..., -1] - 5.0 * f[..., -2] + 4.0 * f[..., -3] - f[..., -4]) / (h * h)
    return out


def derivative_array(values: np.ndarray, grid: Grid, axis: str, order: int) -> np.ndarray:
    if order not in (1, 2):
        raise ValueError(f"derivative order must be 1 or 2, got {order}")
    if axis == "x":
        # x is the second-to-last axis for both scalar and vector arrays
        v = np.moveaxis(values, -2, 0)
        d = dx1(v, grid.hx) if order == 1 else dx2(v, grid.hx)
        return np.moveaxis(d, 0, -2)
    if axis == "z":
        return dz1(values, grid.hz) if order == 1 else dz2(values, grid.hz)
    raise ValueError(f"axis must be 'x' or 'z', got {axis!r}")


def apply_derivative(f: ScalarField, axis: str, order: int) -> ScalarField:
    return ScalarField(f.grid, derivative_array(f.values, f.grid, axis, order))


def gradient(f: ScalarField) -> VectorField:
    g = f.grid
    return VectorField(g, np.stack([derivative_array(f.values, g, "x", 1),
                                    derivative_array(f.values, g, "z", 1)]))


def divergence_array(u: np.ndarray, grid: Grid) -> np.ndarray:
    return derivative_array(u[0], grid, "x", 1) + derivative_array(u[1], grid, "z", 1)


def divergence(v: VectorField) -> ScalarField:
    return ScalarField(v.grid, divergence_array(v.values, v.grid))


def laplacian_array(f: np.ndarray, grid: Grid) -> np.ndarray:
    return derivative_array(f, grid, "x", 2) + derivative_array(f, grid, "z", 2)


def partial_array(values: np.ndarray, grid: Grid, nx_order: int, nz_order: int) -> np.ndarray:
    """D^beta with beta = (nx_order, nz_order); x derivatives first, then z.

    Pure orders >= 2 use the compact second-difference stencil, then a first
    difference for the remaining odd order.
    """
    out = values
    for axis, n in (("x", nx_order), ("z", nz_order)):
        while n >= 2:
            out = derivative_array(out, grid, axis, 2)
            n -= 2
        if n == 1:
            out = derivative_array(out, grid, axis, 1)
    return out


def inner(a: np.ndarray, b: np.ndarray, grid: Grid, where: str = "all") -> float:
    """Quadrature of a.b summed over leading component axes.

    ``where="interior"`` drops the wall nodes; interior nodes carry the full
    cell weight either way.
    """
    w = grid.weights
    if where == "interior":
        w = w * grid.interior
    elif where != "all":
        raise ValueError(where)
    return float(np.sum(a * b * w))


def _multi_indices(s: int):
    for order in range(s + 1):
        for a in range(order, -1, -1):
            yield a, order - a


def sobolev_norm_array(values: np.ndarray, grid: Grid, s: int) -> float:
    if s not in (0, 1, 2, 3):
        raise ValueError(f"sobolev order must be in 0..3, got {s}")
    total = 0.0
    for a, b in _multi_indices(s):
        d = partial_array(values, grid, a, b)
        total += float(np.sum(d * d * grid.weights))
    return float(np.sqrt(total))


def sobolev_norm(f: ScalarField | VectorField, s: int) -> float:
    return sobolev_norm_array(f.values, f.grid, s)


def l2_norm(f: ScalarField | VectorField) -> float:
    return sobolev_norm(f, 0)


def boundary_trace_array(u: np.ndarray, grid: Grid) -> float:
    """Sum over both walls of |u|^2 * hx."""
    if u.ndim == 2:
        u = u[None]
    walls = u[..., [0, -1]]
    return float(np.sum(walls * walls) * grid.hx)


def boundary_trace_l2(v: VectorField) -> float:
    return boundary_trace_array(v.values, v.grid)


# ---------------------------------------------------------------------------
# sparse 1D stencil matrices (used to assemble the Lame operator)

def periodic_d1_matrix(n: int, h: float) -> sparse.csr_matrix:
    i = np.arange(n)
    rows = np.concatenate([i, i])
    cols = np.concatenate([(i + 1) % n, (i - 1) % n])
    data = np.concatenate([np.full(n, 0.5 / h), np.full(n, -0.5 / h)])
    return sparse.csr_matrix((data, (rows, cols)), shape=(n, n))


def periodic_d2_matrix(n: int, h: float) -> sparse.csr_matrix:
    i = np.arange(n)
    rows = np.concatenate([i, i, i])
    cols = np.concatenate([(i + 1) % n, i, (i - 1) % n])
    c = 1.0 / (h * h)
    data = np.concatenate([np.full(n, c), np.full(n, -2.0 * c), np.full(n, c)])
    return sparse.csr_matrix((data, (rows, cols)), shape=(n, n))


def wall_d1_matrix(n: int, h: float) -> sparse.csr_matrix:
    """(n+1)x(n+1) first difference with one-sided wall rows."""
    m = sparse.lil_matrix((n + 1, n + 1))
    for j in range(1, n):
        m[j, j - 1] = -0.5 / h
        m[j, j + 1] = 0.5 / h
    m[0, 0], m[0, 1], m[0, 2] = -1.5 / h, 2.0 / h, -0.5 / h
    m[n, n], m[n, n - 1], m[n, n - 2] = 1.5 / h, -2.0 / h, 0.5 / h
    return m.tocsr()


def wall_d2_matrix(n: int, h: float) -> sparse.csr_matrix:
    m = sparse.lil_matrix((n + 1, n + 1))
    c = 1.0 / (h * h)
    for j in range(1, n):
        m[j, j - 1], m[j, j], m[j, j + 1] = c, -2.0 * c, c
    for j0, s in ((0, 1), (n, -1)):
        m[j0, j0] = 2.0 * c
        m[j0, j0 + s] = -5.0 * c
        m[j0, j0 + 2 * s] = 4.0 * c
        m[j0, j0 + 3 * s] = -c
    return m.tocsr()


def derivative_matrices(grid: Grid) -> dict[str, sparse.csr_matrix]:
    """Node-space operators for d/dx, d2/dx2, d/dz, d2/dz2 (C-order flattening)."""
    ix = sparse.identity(grid.nx, format="csr")
    iz = sparse.identity(grid.nz + 1, format="csr")
    return {
        "x1": sparse.kron(periodic_d1_matrix(grid.nx, grid.hx), iz, format="csr"),
        "x2": sparse.kron(periodic_d2_matrix(grid.nx, grid.hx), iz, format="csr"),
        "z1": sparse.kron(ix, wall_d1_matrix(grid.nz, grid.hz), format="csr"),
        "z2": sparse.kron(ix, wall_d2_matrix(grid.nz, grid.hz), format="csr"),
    }
