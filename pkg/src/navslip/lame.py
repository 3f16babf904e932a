"""Discrete Lame operator with Navier-slip / no-slip wall rows.

Unknowns are vector fields flattened in C order from shape (2, nx, nz+1):
index = comp*N + i*(nz+1) + j. Interior rows carry the operator, wall rows
carry boundary conditions.

At each wall node the normal row is u_z = 0 and the tangential row is

    k*mu*D_n(u_x) + u_x = 0

with D_n the one-sided second-order derivative along the outward normal.
The k-multiplied form keeps every coefficient bounded on k in [0, inf); k = 0
is exactly the no-slip row u_x = 0.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as spla

from .mesh import (Grid, VectorField, derivative_array, derivative_matrices,
                   sobolev_norm_array)

log = logging.getLogger(__name__)

INTERIOR, NORMAL_BC, TANGENTIAL_BC, UNASSIGNED = 0, 1, 2, -1


class SolverError(RuntimeError):
    """Krylov iteration did not reach tolerance."""

    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (final relative residual {residual:.3e})")
        self.residual = residual


class EigenError(RuntimeError):
    pass


@dataclass(frozen=True)
class LameParams:
    mu: float
    lam: float = 0.0

    def __post_init__(self):
        if not (self.mu > 0 and self.mu + 3 * self.lam > 0):
            raise ValueError(
                f"viscosities violate mu > 0 and mu + 3*lam > 0 (mu={self.mu}, lam={self.lam})")


@dataclass(frozen=True)
class SlipBC:
    """Navier slip with slip length parameter k; k = 0 is no-slip."""
    k: float

    def __post_init__(self):
        if not (math.isfinite(self.k) and self.k >= 0):
            raise ValueError(f"slip parameter must be finite and >= 0, got {self.k}")

    @property
    def alpha(self) -> float:
        """Friction coefficient 1/k."""
        if self.k == 0:
            raise ZeroDivisionError("friction coefficient undefined for k = 0")
        return 1.0 / self.k


@dataclass(frozen=True)
class NoSlipBC:
    """Dirichlet walls, assembled independently of the Robin rows."""
    k: float = field(default=0.0, init=False)


@dataclass
class OperatorSystem:
    grid: Grid
    matrix: sparse.csr_matrix
    rhs: np.ndarray
    row_kind: np.ndarray

    @property
    def size(self) -> int:
        return self.matrix.shape[0]


# ---------------------------------------------------------------------------
# indexing helpers

def _node_index(grid: Grid, comp: int, i, j):
    n = grid.node_count
    return comp * n + np.asarray(i) * (grid.nz + 1) + np.asarray(j)


def wall_rows(grid: Grid, comp: int) -> np.ndarray:
    i = np.arange(grid.nx)
    return np.concatenate([_node_index(grid, comp, i, 0), _node_index(grid, comp, i, grid.nz)])


def interior_row_mask(grid: Grid) -> np.ndarray:
    m = np.tile(grid.interior.ravel(), 2)
    return m


# ---------------------------------------------------------------------------
# operator

def apply_lame(u: VectorField, p: LameParams) -> VectorField:
    """mu*Lap(u) + lam*grad(div u); wall-node values are set to zero."""
    return VectorField(u.grid, lame_array(u.values, u.grid, p))


def lame_array(u: np.ndarray, grid: Grid, p: LameParams) -> np.ndarray:
    d = lambda f, a, o: derivative_array(f, grid, a, o)  # noqa: E731
    ux, uz = u
    out = np.empty_like(u)
    out[0] = (p.mu * (d(ux, "x", 2) + d(ux, "z", 2))
              + p.lam * (d(ux, "x", 2) + d(d(uz, "x", 1), "z", 1)))
    out[1] = (p.mu * (d(uz, "x", 2) + d(uz, "z", 2))
              + p.lam * (d(d(ux, "x", 1), "z", 1) + d(uz, "z", 2)))
    out[:, :, 0] = 0.0
    out[:, :, -1] = 0.0
    return out


@lru_cache(maxsize=32)
def lame_matrix(grid: Grid, p: LameParams) -> sparse.csr_matrix:
    """Full-node Lame matrix with wall rows zeroed."""
    D = derivative_matrices(grid)
    lap = D["x2"] + D["z2"]
    xz = D["z1"] @ D["x1"]
    a_xx = p.mu * lap + p.lam * D["x2"]
    a_xz = p.lam * xz
    a_zx = p.lam * xz
    a_zz = p.mu * lap + p.lam * D["z2"]
    full = sparse.bmat([[a_xx, a_xz], [a_zx, a_zz]], format="csr")
    keep = sparse.diags(interior_row_mask(grid).astype(float))
    out = (keep @ full).tocsr()
    out.eliminate_zeros()
    return out


def interior_system(grid: Grid, operator: sparse.spmatrix, rhs: np.ndarray) -> OperatorSystem:
    """Keep interior rows of ``operator``; wall rows left empty."""
    mask = interior_row_mask(grid)
    A = (sparse.diags(mask.astype(float)) @ operator).tocsr()
    A.eliminate_zeros()
    b = np.where(mask, np.asarray(rhs, dtype=float).ravel(), 0.0)
    kind = np.where(mask, INTERIOR, UNASSIGNED).astype(np.int8)
    return OperatorSystem(grid, A, b, kind)


def _wall_block(grid: Grid, tangential_coeffs) -> sparse.csr_matrix:
    """Rows for every wall node: identity on u_z, given stencil on u_x.

    ``tangential_coeffs(wall)`` returns (offsets, values) along z for the
    u_x row at that wall, offsets measured inward from the wall node.
    """
    n_unk = 2 * grid.node_count
    rows, cols, vals = [], [], []
    i = np.arange(grid.nx)
    for wall, j0, step in ((0, 0, 1), (1, grid.nz, -1)):
        r_n = _node_index(grid, 1, i, j0)
        rows.append(r_n), cols.append(r_n), vals.append(np.ones(grid.nx))
        r_t = _node_index(grid, 0, i, j0)
        for off, c in zip(*tangential_coeffs(wall)):
            if c == 0.0:
                continue
            rows.append(r_t)
            cols.append(_node_index(grid, 0, i, j0 + step * off))
            vals.append(np.full(grid.nx, c))
    return sparse.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n_unk, n_unk))


def _with_wall_rows(system: OperatorSystem, block: sparse.csr_matrix) -> OperatorSystem:
    g = system.grid
    if np.any(system.row_kind[wall_rows(g, 0)] != UNASSIGNED) or \
            np.any(system.row_kind[wall_rows(g, 1)] != UNASSIGNED):
        raise ValueError("boundary rows already assigned")
    kind = system.row_kind.copy()
    kind[wall_rows(g, 1)] = NORMAL_BC
    kind[wall_rows(g, 0)] = TANGENTIAL_BC
    rhs = system.rhs.copy()
    rhs[kind != INTERIOR] = 0.0
    A = (system.matrix + block).tocsr()
    A.sort_indices()
    return OperatorSystem(g, A, rhs, kind)


def robin_row_coefficients(bc: SlipBC, p: LameParams, h: float):
    """Stencil of k*mu*D_n(u) + u along the inward offsets 0, 1, 2.

    D_n points outward, so at either wall D_n = (3u0 - 4u1 + u2)/(2h) with
    offsets counted inward from the wall node.
    """
    c = bc.k * p.mu / (2.0 * h)
    return (0, 1, 2), (1.0 + 3.0 * c, -4.0 * c, 1.0 * c)


def assemble_robin_rows(system: OperatorSystem, bc: SlipBC, p: LameParams) -> OperatorSystem:
    if not isinstance(bc, SlipBC):
        raise TypeError("assemble_robin_rows needs a SlipBC")
    coeffs = robin_row_coefficients(bc, p, system.grid.hz)
    return _with_wall_rows(system, _wall_block(system.grid, lambda wall: coeffs))


def assemble_dirichlet_rows(system: OperatorSystem) -> OperatorSystem:
    return _with_wall_rows(system, _wall_block(system.grid, lambda wall: ((0,), (1.0,))))


def assemble_boundary_rows(system: OperatorSystem, bc, p: LameParams) -> OperatorSystem:
    if isinstance(bc, NoSlipBC):
        return assemble_dirichlet_rows(system)
    return assemble_robin_rows(system, bc, p)


# ---------------------------------------------------------------------------
# Krylov solve

def solve_system(system: OperatorSystem, tol: float = 1e-10, x0: np.ndarray | None = None) -> np.ndarray:
    """BiCGSTAB with Jacobi preconditioning, restarted on the true residual."""
    if np.any(system.row_kind == UNASSIGNED):
        raise ValueError("system has unassigned rows")
    A, b = system.matrix, system.rhs
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros_like(b)
    diag = A.diagonal()
    if np.any(diag == 0):
        raise ValueError("zero diagonal entry; Jacobi preconditioner undefined")
    M = sparse.diags(1.0 / diag)
    maxiter = 10 * A.shape[0]

    def rel_res(x):
        return float(np.linalg.norm(b - A @ x) / bnorm)

    count = [0]

    def tick(_):
        count[0] += 1

    absA = abs(A)

    def converged(x, r):
        # target tolerance, or residual already at the roundoff floor
        floor = 64 * np.finfo(float).eps * np.linalg.norm(absA @ np.abs(x)) / bnorm
        return r <= max(tol, floor)

    # restart on the true residual: the recurrence residual drifts on
    # badly row-scaled systems (large k)
    x = x0
    r = np.inf
    while count[0] < maxiter:
        before = count[0]
        x, _ = spla.bicgstab(A, b, x0=x, rtol=tol, atol=0.0, M=M,
                             maxiter=maxiter - count[0], callback=tick)
        r_new = rel_res(x)
        if not np.all(np.isfinite(x)) or converged(x, r_new):
            r = r_new
            break
        if count[0] == before or r_new > 0.5 * r:
            r = r_new
            break
        r = r_new
    if not np.all(np.isfinite(x)) or not converged(x, r):
        raise SolverError("linear solve did not converge", r)
    return x


def _pin_identity_rows(u: np.ndarray, bc) -> np.ndarray:
    # identity wall rows with zero data: pin them exactly rather than to solver tolerance
    u[1, :, 0] = 0.0
    u[1, :, -1] = 0.0
    if bc.k == 0:
        u[0, :, 0] = 0.0
        u[0, :, -1] = 0.0
    return u


def lame_system(g: VectorField, bc, p: LameParams) -> OperatorSystem:
    grid = g.grid
    sys0 = interior_system(grid, lame_matrix(grid, p), -g.values)
    return assemble_boundary_rows(sys0, bc, p)


def solve_lame(g: VectorField, bc, p: LameParams, tol: float = 1e-10) -> VectorField:
    """Solve L u = -g with wall rows from ``bc``."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    system = lame_system(g, bc, p)
    x = solve_system(system, tol)
    u = _pin_identity_rows(x.reshape(2, *g.grid.shape), bc)
    return VectorField(g.grid, u)


@lru_cache(maxsize=32)
def _boundary_block(grid: Grid, bc, p: LameParams) -> sparse.csr_matrix:
    empty = OperatorSystem(grid, sparse.csr_matrix((2 * grid.node_count,) * 2),
                           np.zeros(2 * grid.node_count),
                           np.where(interior_row_mask(grid), INTERIOR, UNASSIGNED).astype(np.int8))
    return assemble_boundary_rows(empty, bc, p).matrix


def implicit_momentum_system(rho: np.ndarray, dt: float, rhs: np.ndarray, grid: Grid,
                             bc, p: LameParams) -> OperatorSystem:
    """(rho I - dt L_h) u = rhs at interior rows, plus wall rows."""
    mask = interior_row_mask(grid)
    rho_rows = np.where(mask, np.tile(rho.ravel(), 2), 0.0)
    A = (sparse.diags(rho_rows) - dt * lame_matrix(grid, p) + _boundary_block(grid, bc, p)).tocsr()
    A.eliminate_zeros()
    A.sort_indices()
    kind = np.where(mask, INTERIOR, 0).astype(np.int8)
    kind[wall_rows(grid, 1)] = NORMAL_BC
    kind[wall_rows(grid, 0)] = TANGENTIAL_BC
    b = np.where(mask, np.asarray(rhs, dtype=float).ravel(), 0.0)
    return OperatorSystem(grid, A, b, kind)


def solve_implicit_momentum(rho, dt: float, rhs: VectorField, bc, p: LameParams,
                            tol: float = 1e-10, x0: np.ndarray | None = None) -> VectorField:
    rho_v = getattr(rho, "values", rho)
    if np.any(~(rho_v > 0)):
        raise ValueError("density must be strictly positive")
    if dt < 0:
        raise ValueError("dt must be >= 0")
    grid = rhs.grid
    system = implicit_momentum_system(rho_v, dt, rhs.values, grid, bc, p)
    x = solve_system(system, tol, None if x0 is None else np.asarray(x0).ravel())
    return VectorField(grid, _pin_identity_rows(x.reshape(2, *grid.shape), bc))


# ---------------------------------------------------------------------------
# eigenpairs

def _reduced_operator(grid: Grid, bc, p: LameParams):
    """-L_h on interior unknowns after eliminating wall values through the BC rows."""
    A_bc = _boundary_block(grid, bc, p)
    L = lame_matrix(grid, p)
    inner_idx = np.flatnonzero(interior_row_mask(grid))
    wall_idx = np.flatnonzero(~interior_row_mask(grid))
    A_bb = A_bc[wall_idx][:, wall_idx]
    A_bi = A_bc[wall_idx][:, inner_idx]
    off = A_bb - sparse.diags(A_bb.diagonal())
    if off.count_nonzero():
        raise EigenError("wall rows are not decoupled; cannot eliminate")
    X = -sparse.diags(1.0 / A_bb.diagonal()) @ A_bi
    S = -(L[inner_idx][:, inner_idx] + L[inner_idx][:, wall_idx] @ X)
    return S.tocsr(), X.tocsr(), inner_idx, wall_idx


def lame_eigenpairs(p: LameParams, bc, count: int, grid: Grid,
                    tol: float = 1e-10) -> list[tuple[float, VectorField]]:
    """Smallest eigenvalues of -L_h subject to the wall rows, ascending.

    Shift-invert about -1 with inner Krylov solves; the spectrum is real
    and nonnegative, so nearest-to-shift equals smallest.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    S, X, inner_idx, wall_idx = _reduced_operator(grid, bc, p)
    n = S.shape[0]
    if count >= n - 1:
        raise ValueError("count too large for this grid")
    shift = -1.0
    shifted = (S - shift * sparse.identity(n, format="csr")).tocsr()
    kinds = np.zeros(n, dtype=np.int8)

    def inv(v):
        sysv = OperatorSystem(grid, shifted, np.asarray(v, dtype=float).ravel(), kinds)
        return solve_system(sysv, tol=1e-13)

    opinv = spla.LinearOperator((n, n), matvec=inv, dtype=float)
    try:
        vals, vecs = spla.eigs(S, k=count, sigma=shift, OPinv=opinv, tol=tol,
                               ncv=min(n, max(2 * count + 1, 20)))
    except spla.ArpackNoConvergence as exc:
        raise EigenError(f"eigen-iteration did not converge: {exc}") from exc
    order = np.argsort(vals.real)
    out = []
    for idx in order:
        lam_, v = vals[idx], vecs[:, idx]
        # fix the arbitrary complex phase before discarding the imaginary part
        piv = np.argmax(np.abs(v))
        v = (v * np.exp(-1j * np.angle(v[piv]))).real
        if abs(lam_.imag) > 1e-8 * max(1.0, abs(lam_.real)):
            raise EigenError(f"complex eigenvalue {lam_}")
        full = np.zeros(2 * grid.node_count)
        full[inner_idx] = v
        full[wall_idx] = X @ v
        arr = full.reshape(2, *grid.shape)
        res = np.linalg.norm(S @ v - lam_.real * v) / max(np.linalg.norm(v), 1e-300)
        if res > 1e-6 * max(1.0, abs(lam_.real)):
            raise EigenError(f"eigenpair residual {res:.3e} too large")
        arr = arr / sobolev_norm_array(arr, grid, 0)
        out.append((float(lam_.real), VectorField(grid, arr)))
    return out


# ---------------------------------------------------------------------------
# K-uniformity of the elliptic estimate

@dataclass
class KUniformityReport:
    k_values: list[float]
    ratios: list[float]                  # R(k) = |u|_H2 / (|u|_L2 + |g|_L2)
    max_min_ratio: float
    threshold: float = 3.0

    @property
    def passed(self) -> bool:
        return self.max_min_ratio <= self.threshold

    def to_dict(self) -> dict:
        return {"k": list(self.k_values), "R": list(self.ratios),
                "max_min_ratio": self.max_min_ratio, "passed": self.passed}


def k_uniformity_report(g: VectorField, p: LameParams, k_list, tol: float = 1e-10) -> KUniformityReport:
    k_list = [float(k) for k in k_list]
    if not k_list:
        raise ValueError("k_list must be nonempty")
    if any(k < 0 for k in k_list):
        raise ValueError("k values must be >= 0")
    grid = g.grid
    g_l2 = sobolev_norm_array(g.values, grid, 0)
    ratios = []
    for k in k_list:
        u = solve_lame(g, SlipBC(k), p, tol=tol)
        num = sobolev_norm_array(u.values, grid, 2)
        den = sobolev_norm_array(u.values, grid, 0) + g_l2
        ratios.append(0.0 if den == 0.0 else num / den)
    r = np.asarray(ratios)
    if np.all(r == 0.0) or len(r) == 1:
        ratio = 1.0
    else:
        ratio = float(r.max() / r.min()) if r.min() > 0 else math.inf
    return KUniformityReport(k_list, ratios, ratio)


def with_k(bc, k: float):
    return SlipBC(k) if isinstance(bc, NoSlipBC) else replace(bc, k=k)
