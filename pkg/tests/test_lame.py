import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import sparse
from scipy.optimize import brentq

from navslip.lame import (NORMAL_BC, TANGENTIAL_BC, LameParams, NoSlipBC, OperatorSystem, SlipBC,
                          SolverError, _boundary_block, apply_lame, assemble_dirichlet_rows,
                          assemble_robin_rows, implicit_momentum_system, interior_system,
                          k_uniformity_report, lame_array, lame_eigenpairs, lame_matrix, lame_system,
                          robin_row_coefficients, solve_implicit_momentum, solve_lame, solve_system,
                          wall_rows)
from navslip.mesh import VectorField, build_grid, inner, sobolev_norm_array, vector


def const_g(grid, gx=2.0):
    return vector(grid, gx, 0.0)


def test_lame_params_validation():
    LameParams(0.1, -0.03)
    with pytest.raises(ValueError):
        LameParams(0.0)
    with pytest.raises(ValueError):
        LameParams(0.1, -0.05)


def test_slip_bc_validation_and_alpha():
    assert SlipBC(0.25).alpha == 4.0
    with pytest.raises(ZeroDivisionError):
        SlipBC(0.0).alpha
    for bad in (-1.0, float("inf"), float("nan")):
        with pytest.raises(ValueError):
            SlipBC(bad)


def test_apply_lame_constant_is_zero():
    g = build_grid(1.0, 8, 8)
    out = apply_lame(vector(g, 1.5, 0.0), LameParams(1.0, 0.3))
    assert np.allclose(out.values, 0.0, atol=1e-10)


def test_apply_lame_quadratic_exact():
    g = build_grid(1.0, 8, 8)
    out = apply_lame(vector(g, lambda x, z: z * z), LameParams(1.0, 0.3)).values
    inner_nodes = out[:, :, 1:-1]
    assert np.allclose(inner_nodes[0], 2.0, atol=1e-9)
    assert np.allclose(inner_nodes[1], 0.0, atol=1e-9)


def test_apply_lame_sine_second_order():
    errs = []
    for n in (16, 32, 64):
        g = build_grid(1.0, 4, n)
        out = apply_lame(vector(g, lambda x, z: np.sin(np.pi * z)), LameParams(1.0, 0.0)).values
        exact = -np.pi ** 2 * np.sin(np.pi * g.Z)
        errs.append(np.abs(out[0][:, 1:-1] - exact[:, 1:-1]).max())
    assert errs[0] / errs[1] > 3.5 and errs[1] / errs[2] > 3.5


def test_matrix_matches_array_operator():
    g = build_grid(1.3, 8, 6)
    p = LameParams(0.7, 0.4)
    rng = np.random.default_rng(3)
    u = rng.normal(size=(2, *g.shape))
    assert np.allclose(lame_matrix(g, p) @ u.ravel(), lame_array(u, g, p).ravel(), atol=1e-9)


# -- boundary rows -----------------------------------------------------------

def test_k0_tangential_row_is_identity():
    idx, coef = robin_row_coefficients(SlipBC(0.0), LameParams(1.0), 0.1)
    assert coef == (1.0, 0.0, 0.0)


def test_robin_rows_satisfied_by_analytic_profile():
    g = build_grid(1.0, 8, 16)
    p = LameParams(1.0, 0.0)
    system = lame_system(const_g(g), SlipBC(1.0), p)
    v = np.stack([-g.Z ** 2 + g.Z + 1.0, np.zeros(g.shape)]).ravel()
    res = system.matrix @ v - system.rhs
    rows = np.concatenate([wall_rows(g, 0), wall_rows(g, 1)])
    assert np.abs(res[rows]).max() < 1e-13


def test_robin_row_large_k_limit_is_neumann():
    h = 0.05
    _, coef = robin_row_coefficients(SlipBC(1e12), LameParams(1.0), h)
    scaled = np.array(coef) / 1e12
    assert np.allclose(scaled, np.array([3.0, -4.0, 1.0]) / (2 * h), rtol=1e-9)


def test_row_classification():
    g = build_grid(1.0, 6, 6)
    s = implicit_momentum_system(np.ones(g.shape), 0.1, np.zeros((2, *g.shape)), g, SlipBC(0.5),
                                 LameParams(1.0))
    assert np.all(s.row_kind[wall_rows(g, 1)] == NORMAL_BC)
    assert np.all(s.row_kind[wall_rows(g, 0)] == TANGENTIAL_BC)
    # every wall node owns one normal and one tangential row
    assert len(wall_rows(g, 0)) == len(wall_rows(g, 1)) == 2 * g.nx


def test_dirichlet_coincidence_bitwise():
    g = build_grid(1.0, 12, 10)
    p = LameParams(0.3, 0.1)
    a = lame_system(const_g(g), SlipBC(0.0), p)
    b = lame_system(const_g(g), NoSlipBC(), p)
    for m in (a.matrix, b.matrix):
        m.sort_indices()
    assert np.array_equal(a.matrix.indptr, b.matrix.indptr)
    assert np.array_equal(a.matrix.indices, b.matrix.indices)
    assert np.array_equal(a.matrix.data, b.matrix.data)
    assert np.array_equal(a.rhs, b.rhs)
    assert (_boundary_block(g, SlipBC(0.0), p) != _boundary_block(g, NoSlipBC(), p)).nnz == 0


# -- solves -------------------------------------------------------------------

@pytest.mark.parametrize("k", [0.0, 0.1, 1.0, 10.0])
@pytest.mark.parametrize("lam", [0.0, 0.5])
def test_solve_lame_analytic_robin(k, lam):
    g = build_grid(1.0, 16, 16)
    u = solve_lame(const_g(g), SlipBC(k), LameParams(1.0, lam))
    exact = -g.Z ** 2 + g.Z + k
    assert np.abs(u.values[0] - exact).max() <= 1e-9
    assert np.abs(u.values[1]).max() <= 1e-9


def test_solve_lame_zero_source():
    g = build_grid(1.0, 8, 8)
    u = solve_lame(const_g(g, 0.0), SlipBC(0.0), LameParams(1.0))
    assert np.array_equal(u.values, np.zeros_like(u.values))


def test_solve_lame_continuous_in_k():
    g = build_grid(1.0, 16, 16)
    f = vector(g, lambda x, z: np.cos(2 * np.pi * x) + z, lambda x, z: np.sin(np.pi * z))
    p = LameParams(0.5, 0.2)
    a = solve_lame(f, SlipBC(0.0), p).values
    b = solve_lame(f, SlipBC(1e-14), p).values
    assert sobolev_norm_array(a - b, g, 0) <= 1e-10


def test_solve_then_apply_reproduces_source():
    g = build_grid(1.0, 16, 16)
    f = vector(g, lambda x, z: np.cos(2 * np.pi * x) * z, lambda x, z: np.sin(2 * np.pi * x) * z * (1 - z))
    p = LameParams(0.5, 0.2)
    u = solve_lame(f, SlipBC(0.3), p, tol=1e-12)
    out = apply_lame(u, p).values
    scale = np.abs(f.values).max()
    assert np.abs(out[:, :, 1:-1] + f.values[:, :, 1:-1]).max() <= 1e-8 * scale


def test_solve_lame_rejects_bad_tol():
    g = build_grid(1.0, 8, 8)
    with pytest.raises(ValueError):
        solve_lame(const_g(g), SlipBC(0.0), LameParams(1.0), tol=0.0)


def test_solver_failure_reports_residual():
    # inconsistent singular system: no solution exists
    A = sparse.csr_matrix(np.array([[1.0, 1.0], [1.0, 1.0]]))
    g = build_grid(1.0, 4, 4)
    system = OperatorSystem(g, A, np.array([1.0, 0.0]), np.zeros(2, dtype=np.int8))
    with pytest.raises(SolverError) as info:
        solve_system(system, tol=1e-10)
    assert info.value.residual > 1e-3


def test_implicit_momentum_dt_zero():
    g = build_grid(1.0, 8, 8)
    rho = 1.0 + 0.5 * g.Z
    rhs = np.stack([np.sin(np.pi * g.Z) * (1 + 0.5 * g.Z), g.Z * (1 - g.Z)])
    u = solve_implicit_momentum(rho, 0.0, VectorField(g, rhs), SlipBC(0.4), LameParams(1.0), tol=1e-12)
    assert np.allclose(u.values[:, :, 1:-1], (rhs / rho)[:, :, 1:-1], atol=1e-10)
    assert np.all(u.values[1][:, [0, -1]] == 0.0)


def test_implicit_momentum_trivial():
    g = build_grid(1.0, 8, 8)
    u = solve_implicit_momentum(np.ones(g.shape), 0.1, VectorField(g, np.zeros((2, *g.shape))),
                                SlipBC(0.0), LameParams(1.0))
    assert not np.any(u.values)


def test_implicit_momentum_sine_oracle():
    mu, dt = 1.0, 0.01
    errs = []
    for n in (16, 32, 64):
        g = build_grid(1.0, 4, n)
        rhs = vector(g, lambda x, z: np.sin(np.pi * z))
        rhs.values[0][:, [0, -1]] = 0.0
        u = solve_implicit_momentum(np.ones(g.shape), dt, rhs, SlipBC(0.0), LameParams(mu), tol=1e-12)
        exact = np.sin(np.pi * g.Z) / (1 + dt * mu * np.pi ** 2)
        errs.append(np.abs(u.values[0] - exact).max())
    # centred-difference truncation: dt mu pi^4 h^2 / 12 per unit amplitude
    assert errs[-1] < 2 * dt * mu * np.pi ** 4 / 12 / 64 ** 2
    assert errs[0] / errs[1] > 3.5 and errs[1] / errs[2] > 3.5


def test_implicit_momentum_rejects_bad_input():
    g = build_grid(1.0, 8, 8)
    rhs = VectorField(g, np.zeros((2, *g.shape)))
    rho = np.ones(g.shape)
    rho[2, 3] = 0.0
    with pytest.raises(ValueError):
        solve_implicit_momentum(rho, 0.1, rhs, SlipBC(0.0), LameParams(1.0))
    with pytest.raises(ValueError):
        solve_implicit_momentum(np.ones(g.shape), -0.1, rhs, SlipBC(0.0), LameParams(1.0))


# -- eigenpairs ----------------------------------------------------------------

def test_eigen_dirichlet_smallest_is_pi_squared():
    errs = []
    for n in (16, 32):
        vals = [v for v, _ in lame_eigenpairs(LameParams(1.0, 0.0), SlipBC(0.0), 2, build_grid(1.0, 8, n))]
        errs.append(abs(vals[0] - np.pi ** 2))
    assert errs[-1] / np.pi ** 2 < 5e-3
    assert errs[0] / errs[1] > 3.5


def test_eigen_neumann_limit():
    vals = lame_eigenpairs(LameParams(1.0, 0.0), SlipBC(1e6), 1, build_grid(1.0, 8, 16))
    assert abs(vals[0][0]) <= 1e-4


def robin_root():
    # -v'' = w^2 v, v(0) = v'(0), v(1) = -v'(1): 2 w cos w + (1 - w^2) sin w = 0
    f = lambda w: 2 * w * np.cos(w) + (1 - w * w) * np.sin(w)  # noqa: E731
    return brentq(f, 0.5, 2.0) ** 2


def test_eigen_robin_matches_transcendental_root():
    target = robin_root()
    errs = []
    for n in (16, 32, 64):
        val = lame_eigenpairs(LameParams(1.0, 0.0), SlipBC(1.0), 1, build_grid(1.0, 8, n))[0][0]
        errs.append(abs(val - target))
    assert errs[-1] / target < 1e-3
    assert errs[0] / errs[2] > 10


def test_eigenfields_normalised_and_sorted():
    pairs = lame_eigenpairs(LameParams(1.0, 0.2), SlipBC(0.1), 4, build_grid(1.0, 8, 8))
    vals = [v for v, _ in pairs]
    assert vals == sorted(vals)
    for _, f in pairs:
        assert sobolev_norm_array(f.values, f.grid, 0) == pytest.approx(1.0, rel=1e-12)


@given(st.floats(0.05, 3.0), st.floats(-0.3, 1.0), st.sampled_from([0.0, 1e-3, 0.1, 1.0, 30.0]))
def test_eigenvalues_real_nonnegative(mu, lam_frac, k):
    lam = lam_frac * mu          # lam >= -0.3 mu keeps mu + 3 lam > 0
    pairs = lame_eigenpairs(LameParams(mu, lam), SlipBC(k), 3, build_grid(1.0, 6, 6))
    assert all(v >= -1e-8 for v, _ in pairs)


def admissible_field(grid, rng, k, mu):
    """Smooth random field satisfying the discrete wall rows for slip parameter k."""
    X, Z = grid.X, grid.Z
    u = np.zeros((2, *grid.shape))
    for m in range(3):
        for q in range(1, 4):
            for c in range(2):
                phase = rng.uniform(0, 6)
                shift = 0.0 if c else rng.uniform(0, 3)
                u[c] += rng.normal() * np.cos(2 * np.pi * m * X + phase) * np.sin(q * np.pi * Z + shift)
    cc = k * mu / (2 * grid.hz)
    u[1][:, [0, -1]] = 0.0
    u[0][:, 0] = (4 * cc * u[0][:, 1] - cc * u[0][:, 2]) / (1 + 3 * cc)
    u[0][:, -1] = (4 * cc * u[0][:, -2] - cc * u[0][:, -3]) / (1 + 3 * cc)
    return u


@given(st.integers(0, 2 ** 32 - 1), st.floats(-3, 2), st.floats(0.1, 3.0), st.floats(-0.3, 1.0))
def test_quadratic_form_nonnegative(seed, log_k, mu, lam_frac):
    g = build_grid(1.0, 16, 16)
    k = 10.0 ** log_k
    p = LameParams(mu, lam_frac * mu)
    u = admissible_field(g, np.random.default_rng(seed), k, mu)
    form = -inner(lame_array(u, g, p), u, g, "interior")
    assert form >= -1e-8 * mu * sobolev_norm_array(u, g, 1) ** 2
    # the wall term carried by the slip rows is nonnegative as well
    trace = np.sum(u[:, :, [0, -1]] ** 2) * g.hx
    assert trace / k >= 0.0


# -- K-uniformity ----------------------------------------------------------------

def test_k_uniformity_zero_source():
    g = build_grid(1.0, 8, 8)
    rep = k_uniformity_report(const_g(g, 0.0), LameParams(1.0), [0.0, 1.0])
    assert rep.ratios == [0.0, 0.0] and rep.max_min_ratio == 1.0


def test_k_uniformity_single_k():
    g = build_grid(1.0, 8, 8)
    assert k_uniformity_report(const_g(g), LameParams(1.0), [0.3]).max_min_ratio == 1.0


def test_k_uniformity_constant_source():
    g = build_grid(1.0, 32, 32)
    rep = k_uniformity_report(const_g(g), LameParams(1.0), [0.0, 1e-3, 1.0, 1e3])
    assert rep.passed and rep.max_min_ratio <= 3.0


def test_k_uniformity_rejects_bad_lists():
    g = build_grid(1.0, 8, 8)
    with pytest.raises(ValueError):
        k_uniformity_report(const_g(g), LameParams(1.0), [])
    with pytest.raises(ValueError):
        k_uniformity_report(const_g(g), LameParams(1.0), [-1.0])


def test_assembly_helpers_compose():
    g = build_grid(1.0, 6, 6)
    p = LameParams(1.0)
    base = interior_system(g, lame_matrix(g, p), np.zeros(2 * g.node_count))
    a = assemble_robin_rows(base, SlipBC(0.0), p)
    b = assemble_dirichlet_rows(base)
    assert (a.matrix != b.matrix).nnz == 0
    with pytest.raises(TypeError):
        assemble_robin_rows(base, NoSlipBC(), p)
