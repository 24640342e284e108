import numpy as np
import pytest

from permlab.errors import IncompatibleDivergence, NoAnchor
from permlab.geometry import AxisSquare, rasterize_cell
from permlab.grid import (
    CellField,
    StaggeredField,
    div,
    grad_energy_inner,
    inner_staggered,
    norm_l2_cell,
    norm_l2_staggered,
    periodic_grid,
)
from permlab.saddle import SaddleProblem, solve

RNG = np.random.default_rng(7)


def unit_force(grid, j):
    fu = np.ones(grid.u_shape) if j == 0 else np.zeros(grid.u_shape)
    fv = np.ones(grid.v_shape) if j == 1 else np.zeros(grid.v_shape)
    return StaggeredField(grid, fu, fv)


def masked_problem(n=16, j=0, nu=1.0):
    g = periodic_grid(n)
    solid = rasterize_cell(AxisSquare((0.5, 0.5), 0.5), n)
    return SaddleProblem(g, nu, unit_force(g, j), None, solid)


def test_zero_data_gives_zero_solution():
    g = periodic_grid(16)
    solid = rasterize_cell(AxisSquare((0.5, 0.5), 0.5), 16)
    sol = solve(SaddleProblem(g, 1.0, StaggeredField.zeros(g), None, solid))
    assert np.abs(sol.u.u).max() == 0.0
    assert np.abs(sol.u.v).max() == 0.0
    assert np.abs(sol.p.data).max() == 0.0
    assert sol.converged


def test_mean_force_without_anchor_raises():
    g = periodic_grid(16)
    with pytest.raises(NoAnchor):
        solve(SaddleProblem(g, 1.0, unit_force(g, 0), None, None))


def manufactured_error(n):
    g = periodic_grid(n)
    xu, yu = g.u_face_centers()
    xp, yp = g.cell_centers()
    fu = 4 * np.pi ** 2 * np.sin(2 * np.pi * yu) - 2 * np.pi * np.sin(2 * np.pi * xu)
    sol = solve(SaddleProblem(g, 1.0, StaggeredField(g, fu, np.zeros(g.v_shape)), None, None),
                tol=1e-12)
    assert sol.converged
    vel_err = sol.u.u - np.sin(2 * np.pi * yu)
    p_exact = np.cos(2 * np.pi * xp)
    p_err = sol.p.data - (p_exact - p_exact.mean())
    return (norm_l2_staggered(StaggeredField(g, vel_err, sol.u.v))
            + norm_l2_cell(CellField(g, p_err)))


def test_manufactured_solution_second_order():
    ns = (16, 32, 64)
    errs = [manufactured_error(n) for n in ns]
    slope = np.polyfit(np.log([1.0 / n for n in ns]), np.log(errs), 1)[0]
    assert 1.7 <= slope <= 2.2


def test_energy_identity():
    tol = 1e-10
    problem = masked_problem(24)
    sol = solve(problem, tol=tol)
    energy = grad_energy_inner(sol.u, sol.u, problem.solid)
    work = inner_staggered(problem.f, sol.u)
    assert abs(energy - work) <= 10 * tol * max(abs(work), 1e-30) + 1e-14


def test_linearity_in_the_force():
    problem = masked_problem(16)
    sol1 = solve(problem, tol=1e-10)
    scaled = SaddleProblem(problem.grid, problem.nu,
                           StaggeredField(problem.grid, 3.0 * problem.f.u, 3.0 * problem.f.v),
                           None, problem.solid)
    sol3 = solve(scaled, tol=1e-10)
    diff_u = np.abs(sol3.u.u - 3.0 * sol1.u.u).max()
    diff_p = np.abs(sol3.p.data - 3.0 * sol1.p.data).max()
    scale = max(np.abs(sol3.u.u).max(), np.abs(sol3.p.data).max())
    assert diff_u <= 1e-7 * scale
    assert diff_p <= 1e-7 * scale


def test_divergence_residual_monotone():
    sol = solve(masked_problem(16), tol=1e-10, record_history=True)
    hist = sol.div_history
    assert len(hist) >= 2
    top = max(hist)
    for a, b in zip(hist, hist[1:]):
        assert b <= a * (1.0 + 1e-7) + 1e-14 * top


def test_prescribed_divergence():
    g = periodic_grid(16)
    solid = rasterize_cell(AxisSquare((0.5, 0.5), 0.5), 16)
    fluid = ~solid
    target = np.where(fluid, RNG.standard_normal(g.p_shape), 0.0)
    target[fluid] -= target[fluid].mean()
    sol = solve(SaddleProblem(g, 1.0, StaggeredField.zeros(g), CellField(g, target), solid),
                tol=1e-9)
    assert sol.converged
    got = div(sol.u).data
    err = norm_l2_cell(CellField(g, np.where(fluid, got - target, 0.0)))
    assert err <= 1e-9


def test_incompatible_divergence_raises():
    g = periodic_grid(16)
    solid = rasterize_cell(AxisSquare((0.5, 0.5), 0.5), 16)
    bad = CellField(g, np.where(~solid, 1.0, 0.0))  # integrates to |Y_f| != 0
    with pytest.raises(IncompatibleDivergence):
        solve(SaddleProblem(g, 1.0, StaggeredField.zeros(g), bad, solid))


def test_pressure_zero_mean_and_masked():
    sol = solve(masked_problem(16))
    solid = rasterize_cell(AxisSquare((0.5, 0.5), 0.5), 16)
    assert np.abs(sol.p.data[solid]).max() == 0.0
    fluid_vals = sol.p.data[~solid]
    assert abs(fluid_vals.mean()) <= 1e-12 * max(1.0, np.abs(fluid_vals).max())


def test_deterministic_repeat():
    a = solve(masked_problem(16))
    b = solve(masked_problem(16))
    assert np.array_equal(a.u.u, b.u.u)
    assert np.array_equal(a.u.v, b.u.v)
    assert np.array_equal(a.p.data, b.p.data)


def test_viscosity_scaling_only_rescales():
    # nu enters as a pure scale when g = 0: u(nu) = u(1)/nu, p unchanged
    sol1 = solve(masked_problem(16, nu=1.0), tol=1e-11)
    sol2 = solve(masked_problem(16, nu=4.0), tol=1e-11)
    assert np.abs(sol2.u.u - sol1.u.u / 4.0).max() <= 1e-9 * np.abs(sol1.u.u).max()
    assert np.abs(sol2.p.data - sol1.p.data).max() <= 1e-7 * np.abs(sol1.p.data).max()
