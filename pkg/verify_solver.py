"""Discrete operator, preconditioned CG, elliptic measure, random walks and the kernel profile."""

import numpy as np
import pytest

from emlab.construction import AmplitudeSchedule, CoefficientField, make_lacunary
from emlab.errors import ConvergenceError, DegenerateCellError, InvalidArgument, ResolutionError
from emlab.kernel import (
    KernelConfig,
    compare_kernel_to_riesz,
    doubling_ratios,
    kernel_profile,
    ratio_spread_change,
)
from emlab.random_walk import measure_mc_oracle, transition_table
from emlab.solver import (
    Grid,
    PoissonKernelProfile,
    assemble,
    elliptic_measure,
    interior_values,
    pcg,
    poisson_kernel_profile,
    solve_dirichlet,
)


@pytest.fixture(scope="module")
def laplace_field():
    return CoefficientField(make_lacunary(2), AmplitudeSchedule.parse("flat"), level=1)


@pytest.fixture(scope="module")
def level_op():
    fld = CoefficientField(make_lacunary(2), AmplitudeSchedule.parse("sqrt"), level=1)
    return assemble(fld, Grid.for_field(fld, 0.0, 1.0, 1.0))


@pytest.fixture(scope="module")
def square_op(laplace_field):
    return assemble(laplace_field, Grid(0.0, 1.0, 1.0, 128, 128))


def node_coordinates(op):
    grid = op.grid
    xs = grid.x0 + grid.hx * np.arange(1, grid.nx)
    ys = grid.hy * np.arange(1, grid.ny)
    return np.meshgrid(xs, ys)


# ─────────────────────────────────────────────
#  GRID AND ASSEMBLY
# ─────────────────────────────────────────────

def test_grid_for_field_meets_resolution(level_op):
    grid = level_op.grid
    assert (grid.nx, grid.ny) == (64, 64)
    assert grid.interior_count == 63 * 63
    assert grid.node(3, 2) == pytest.approx((3 / 64, 2 / 64))
    assert grid.nearest_node(0.5, 0.5) == (32, 32)


def test_coarse_grid_rejected(laplace_field):
    with pytest.raises(ResolutionError):
        assemble(laplace_field, Grid(0.0, 1.0, 1.0, 32, 64))
    with pytest.raises(InvalidArgument):
        Grid(0.0, 1.0, 1.0, 4, 64)


def test_limit_field_not_discretized():
    with pytest.raises(InvalidArgument):
        assemble(CoefficientField(make_lacunary(2)), Grid(0.0, 1.0, 1.0, 128, 128))


def test_matrix_symmetric_with_zero_row_sums(level_op):
    assert abs(level_op.matrix - level_op.matrix.T).max() == 0.0
    row_sums = np.asarray(level_op.matrix.sum(axis=1)).ravel() - np.asarray(level_op.coupling.sum(axis=1)).ravel()
    assert np.abs(row_sums).max() <= 1e-13
    assert level_op.coupling.min() >= 0.0


def test_laplacian_stencil(square_op):
    matrix = square_op.matrix
    centre = square_op.interior_index((64, 64))
    assert matrix[centre, centre] == pytest.approx(4.0)
    assert matrix[centre, square_op.interior_index((63, 64))] == pytest.approx(-1.0)
    assert matrix[centre, square_op.interior_index((64, 65))] == pytest.approx(-1.0)
    assert matrix.getrow(centre).nnz == 5


def test_boundary_ordering(square_op):
    sides = square_op.boundary.side
    assert len(square_op.boundary) == 4 * 127
    assert list(dict.fromkeys(sides)) == ["bottom", "right", "top", "left"]
    assert (square_op.boundary.i[0], square_op.boundary.j[0]) == (1, 0)
    assert (square_op.boundary.i[127], square_op.boundary.j[127]) == (128, 1)


def test_interior_index_rejects_boundary(square_op):
    with pytest.raises(InvalidArgument):
        square_op.interior_index((0, 5))


# ─────────────────────────────────────────────
#  DIRICHLET PROBLEM
# ─────────────────────────────────────────────

def test_constant_data_gives_constant_solution(level_op):
    u = solve_dirichlet(level_op, np.ones(len(level_op.boundary)), 1e-12)
    assert np.abs(u - 1.0).max() <= 1e-7


def test_linear_in_x_is_reproduced(level_op):
    # x-faces do not see α, so u = x is discretely harmonic for every Level(j)
    grid, cells = level_op.grid, level_op.boundary
    data = grid.x0 + grid.hx * cells.i
    u = interior_values(level_op, solve_dirichlet(level_op, data, 1e-12))
    x, _ = node_coordinates(level_op)
    assert np.abs(u - x).max() <= 1e-7


def test_maximum_principle(level_op, rng):
    data = rng.uniform(-1.0, 2.0, len(level_op.boundary))
    u = solve_dirichlet(level_op, data, 1e-12)
    slack = 1e-7
    assert u.min() >= data.min() - slack
    assert u.max() <= data.max() + slack


def test_tolerance_range(level_op):
    with pytest.raises(InvalidArgument):
        solve_dirichlet(level_op, np.ones(len(level_op.boundary)), 0.1)
    with pytest.raises(InvalidArgument):
        solve_dirichlet(level_op, np.ones(3))


def test_pcg_reports_non_convergence(level_op):
    rhs = level_op.coupling @ np.ones(len(level_op.boundary))
    with pytest.raises(ConvergenceError) as info:
        pcg(level_op.matrix, rhs, 1e-12, max_iter=3)
    assert len(info.value.residual_history) == 4


def test_pcg_preconditioners_agree(level_op, rng):
    rhs = rng.standard_normal(level_op.matrix.shape[0])
    jacobi = pcg(level_op.matrix, rhs, 1e-11, "jacobi")
    amg = pcg(level_op.matrix, rhs, 1e-11, "amg")
    assert amg.iterations < jacobi.iterations
    assert np.linalg.norm(jacobi.solution - amg.solution) <= 1e-6 * np.linalg.norm(jacobi.solution)
    with pytest.raises(InvalidArgument):
        pcg(level_op.matrix, rhs, 1e-8, "ilu")


# ─────────────────────────────────────────────
#  ELLIPTIC MEASURE
# ─────────────────────────────────────────────

def test_laplacian_sides_are_quarters(square_op):
    omega = elliptic_measure(square_op, (64, 64))
    for side, mass in omega.side_totals().items():
        assert abs(mass - 0.25) <= 1e-6, side


def test_measure_is_probability(level_op):
    omega = elliptic_measure(level_op, (20, 40))
    assert abs(omega.total - 1.0) <= 1e-9
    assert omega.mass.min() >= -1e-12
    frame = omega.to_frame()
    assert list(frame.columns) == ["side", "cell_index", "mass"]
    assert len(frame) == len(level_op.boundary)


def test_duality_with_direct_solves(level_op, rng):
    pole = (32, 32)
    omega = elliptic_measure(level_op, pole, rel_tol=1e-13, preconditioner="amg")
    p = level_op.interior_index(pole)
    for _ in range(20):
        data = rng.random(len(level_op.boundary))
        direct = solve_dirichlet(level_op, data, 1e-13, preconditioner="amg")[p]
        assert abs(direct - omega.mass @ data) <= 1e-9


def test_transposed_solve_matches(level_op):
    omega = elliptic_measure(level_op, (32, 32))
    adjoint = elliptic_measure(level_op, (32, 32), transpose=True)
    assert np.abs(adjoint.mass - omega.mass).max() <= 1e-10


def test_pole_on_boundary_rejected(level_op):
    with pytest.raises(InvalidArgument):
        elliptic_measure(level_op, (0, 10))


# ─────────────────────────────────────────────
#  RANDOM WALK
# ─────────────────────────────────────────────

def test_transition_rows_are_distributions(level_op):
    targets, cumulative = transition_table(level_op)
    assert targets.shape == (level_op.matrix.shape[0], 4)
    assert np.allclose(cumulative[:, -1], 1.0, atol=1e-14)
    assert np.all(np.diff(cumulative, axis=1) > 0)


def test_single_walker_hits_one_cell(level_op):
    oracle = measure_mc_oracle(level_op, (32, 32), walkers=1, seed=4)
    assert oracle.total == 1.0
    assert np.count_nonzero(oracle.mass) == 1


def test_walks_independent_of_threads(level_op):
    one = measure_mc_oracle(level_op, (32, 32), walkers=20_000, seed=9, threads=1)
    many = measure_mc_oracle(level_op, (32, 32), walkers=20_000, seed=9, threads=3)
    assert np.array_equal(one.mass, many.mass)


def test_walker_count_validated(level_op):
    with pytest.raises(InvalidArgument):
        measure_mc_oracle(level_op, (32, 32), walkers=0)


@pytest.mark.slow
def test_random_walk_agrees_with_solver_on_level_two():
    walkers = 100_000
    fld = CoefficientField(make_lacunary(3), AmplitudeSchedule.parse("sqrt"), level=2)
    fitted = Grid.for_field(fld, 0.0, 1.0, 1.0)
    side = max(fitted.nx, fitted.ny)
    op = assemble(fld, Grid(0.0, 1.0, 1.0, side, side))
    pole = op.grid.nearest_node(0.5, 0.5)
    omega = elliptic_measure(op, pole)
    oracle = measure_mc_oracle(op, pole, walkers, seed=0)
    for name in ("bottom", "right", "top", "left"):
        exact = omega.side_mass(name)
        se = np.sqrt(exact * (1 - exact) / walkers)
        assert abs(oracle.side_mass(name) - exact) <= 4 * se, name


@pytest.mark.slow
def test_random_walk_from_laplacian_centre(square_op):
    oracle = measure_mc_oracle(square_op, (64, 64), 100_000, seed=0)
    for name in ("bottom", "right", "top", "left"):
        assert abs(oracle.side_mass(name) - 0.25) <= 0.0041, name


# ─────────────────────────────────────────────
#  KERNEL PROFILE
# ─────────────────────────────────────────────

def test_profile_needs_coverage(square_op):
    omega = elliptic_measure(square_op, (64, 64))
    with pytest.raises(InvalidArgument):
        poisson_kernel_profile(omega, square_op.grid)


def test_doubling_ratios_of_uniform_density():
    x = -1.0 + 1 / 64 * np.arange(129)
    table = doubling_ratios(PoissonKernelProfile(x, np.ones_like(x), 1 / 64))
    assert list(table.columns) == ["left", "right", "ratio"]
    assert np.allclose(table["ratio"], 2.0)
    width = table["right"] - table["left"]
    assert (table["left"] - width / 2 >= -1.0).all()
    assert (table["right"] + width / 2 <= 1.0).all()


def test_kernel_j_range():
    with pytest.raises(InvalidArgument):
        kernel_profile(4)


def test_flat_kernel_has_no_correlation():
    comparison = compare_kernel_to_riesz(1, KernelConfig(AmplitudeSchedule.parse("flat")))
    run = comparison.run
    assert comparison.correlation is None
    assert not comparison.correlation_applicable
    assert abs(run.measure.total - 1.0) <= 1e-9
    assert 0.0 < run.profile.total_mass <= 1.0 + 1e-9
    assert list(comparison.table.columns) == ["x", "kernel_density", "riesz_value", "ratio"]
    assert np.allclose(comparison.table["ratio"].mean(), 1.0)


def test_nonpositive_cell_is_degenerate(monkeypatch):
    import emlab.kernel as kernel

    real = kernel.kernel_profile

    def zeroed(j, cfg):
        run = real(j, cfg)
        density = run.profile.density.copy()
        density[3] = 0.0
        profile = PoissonKernelProfile(run.profile.x, density, run.profile.hx)
        return kernel.KernelRun(run.grid, run.measure, profile)

    monkeypatch.setattr(kernel, "kernel_profile", zeroed)
    with pytest.raises(DegenerateCellError) as info:
        compare_kernel_to_riesz(1, KernelConfig(AmplitudeSchedule.parse("flat")))
    assert info.value.value == 0.0


@pytest.mark.slow
@pytest.mark.parametrize("j", [1, 2])
def test_kernel_ratios_stable_under_refinement(j):
    coarse = compare_kernel_to_riesz(j, KernelConfig())
    fine = compare_kernel_to_riesz(j, KernelConfig(refine=2))
    assert coarse.min_ratio > 0
    assert ratio_spread_change(coarse, fine) < 0.2


def test_operator_symmetry_on_random_pairs(level_op, rng):
    matrix = level_op.matrix
    for _ in range(100):
        u, v = rng.standard_normal((2, matrix.shape[0]))
        lhs, rhs = (matrix @ u) @ v, u @ (matrix @ v)
        assert abs(lhs - rhs) <= 1e-12 * max(abs(lhs), 1.0)


def test_laplacian_profile_is_positive():
    run = kernel_profile(1, KernelConfig(AmplitudeSchedule.parse("flat")))
    density = run.profile.density
    assert density.min() > 0
    assert run.profile.x.min() >= -1.0 - 1e-12 and run.profile.x.max() <= 1.0 + 1e-12
    peak = run.profile.x[np.argmax(density)]
    assert abs(peak - 0.5) <= 0.05
