import numpy as np
import pytest

from permlab.cell import PermTensor
from permlab.darcy import DarcyProblem, effective_velocity, solve_darcy, write_flux_report
from permlab.errors import IncompatibleFlux, SingularK
from permlab.geometry import Layout

I2 = PermTensor(np.eye(2))
SPLIT = Layout.half_split(2, 0.5, 0, 1)


def force_const(f1, f2):
    return lambda x, y: (np.full(np.shape(x), f1), np.full(np.shape(x), f2))


def force_sine(x, y):
    return np.sin(np.pi * y), np.zeros(np.shape(x))


def test_constant_force_absorbed_by_pressure():
    sol = solve_darcy(DarcyProblem(SPLIT, (I2, I2), force_const(0.0, 1.0), 32))
    _, yc = sol.grid.cell_centers()
    exact = yc - yc.mean()
    assert np.abs(sol.P0.data - exact).max() <= 1e-10
    assert max(np.abs(sol.u0_x).max(), np.abs(sol.u0_y).max()) <= 1e-9


def test_piecewise_k_constant_force_same_pressure():
    tensors = (PermTensor(2 * np.eye(2)), I2)
    sol = solve_darcy(DarcyProblem(SPLIT, tensors, force_const(0.0, 1.0), 32))
    _, yc = sol.grid.cell_centers()
    exact = yc - yc.mean()
    assert np.abs(sol.P0.data - exact).max() <= 1e-10
    assert max(np.abs(sol.u0_x).max(), np.abs(sol.u0_y).max()) <= 1e-9


@pytest.mark.parametrize("n", [64, 128])
def test_sine_force_conservation_and_flux_continuity(n):
    tensors = (PermTensor(2 * np.eye(2)), I2)
    sol = solve_darcy(DarcyProblem(SPLIT, tensors, force_sine, n), tol=1e-10)
    assert sol.conservation_residual <= 1e-10
    assert len(sol.interface_faces) == n
    assert max(abs(f.normal_jump) for f in sol.interface_faces) <= 1e-12
    # the solution genuinely moves
    assert np.sqrt(np.mean(sol.u0_x ** 2 + sol.u0_y ** 2)) > 1e-3


def test_tangential_jump_nonzero_for_different_k():
    tensors = (PermTensor(2 * np.eye(2)), I2)
    sol = solve_darcy(DarcyProblem(SPLIT, tensors, force_sine, 64))
    fields, report = effective_velocity(sol)
    assert set(fields) == {0, 1}
    assert max(abs(f.tangential_jump) for f in report) > 1e-3
    assert max(abs(f.normal_jump) for f in report) <= 1e-12


def test_equal_isotropic_k_both_jumps_vanish():
    sol = solve_darcy(DarcyProblem(SPLIT, (I2, I2), force_const(0.3, -0.4), 32))
    _, report = effective_velocity(sol)
    assert max(abs(f.normal_jump) for f in report) <= 1e-12
    assert max(abs(f.tangential_jump) for f in report) <= 1e-9


def test_anisotropic_constant_force_exact():
    tensors = (PermTensor(np.array([[2.0, 0.5], [0.5, 1.0]])),
               PermTensor(np.array([[1.0, -0.3], [-0.3, 1.5]])))
    sol = solve_darcy(DarcyProblem(SPLIT, tensors, force_const(0.7, -0.2), 48))
    xc, yc = sol.grid.cell_centers()
    exact = 0.7 * xc - 0.2 * yc
    exact -= exact.mean()
    assert np.abs(sol.P0.data - exact).max() <= 1e-10
    assert max(np.abs(sol.u0_x).max(), np.abs(sol.u0_y).max()) <= 1e-9
    assert max(abs(f.normal_jump) for f in sol.interface_faces) <= 1e-12


def test_global_interface_balance():
    tensors = (PermTensor(2 * np.eye(2)), I2)
    sol = solve_darcy(DarcyProblem(SPLIT, tensors, force_sine, 64))
    # side-by-side one-sided fluxes balance in aggregate
    total_jump = sum(f.normal_jump for f in sol.interface_faces)
    assert abs(total_jump) <= 1e-12
    # net flux through the interface vanishes against the no-flux walls
    j = 32  # interface row of horizontal faces
    assert abs(sol.qy[:, j].sum() * sol.grid.h) <= 1e-11


def test_gauge_invariance_of_velocity():
    tensors = (PermTensor(2 * np.eye(2)), I2)
    problem = DarcyProblem(SPLIT, tensors, force_sine, 32)
    sol = solve_darcy(problem)
    shifted = solve_darcy(problem, seed_pressure=np.full((32, 32), 11.0))
    assert np.abs(shifted.u0_x - sol.u0_x).max() <= 1e-9
    assert np.abs(shifted.u0_y - sol.u0_y).max() <= 1e-9


def test_seeded_solves_agree():
    problem = DarcyProblem(SPLIT, (PermTensor(2 * np.eye(2)), I2), force_sine, 48)
    tol = 1e-10
    base = solve_darcy(problem, tol=tol)
    rng = np.random.default_rng(3)
    seeded = solve_darcy(problem, tol=tol, seed_pressure=rng.standard_normal((48, 48)))
    assert np.abs(base.P0.data - seeded.P0.data).max() <= 10 * tol


def test_singular_k_rejected():
    bad = PermTensor(np.array([[1.0, 2.0], [2.0, 1.0]]))  # indefinite
    with pytest.raises(SingularK):
        DarcyProblem(SPLIT, (bad, I2), force_sine, 16)


def test_incompatible_boundary_flux_rejected():
    def bf(x, y, nx, ny):
        return np.where(np.asarray(nx) > 0, 1.0, 0.0)
    with pytest.raises(IncompatibleFlux):
        solve_darcy(DarcyProblem(SPLIT, (I2, I2), force_const(0.0, 0.0), 16,
                                 boundary_flux=bf))


def test_compatible_throughflow():
    def bf(x, y, nx, ny):
        return np.asarray(nx) * 0.5  # inflow left, outflow right
    sol = solve_darcy(DarcyProblem(Layout.whole(0), (I2,), force_const(0.0, 0.0), 32,
                                   boundary_flux=bf))
    assert np.abs(sol.u0_x - 0.5).max() <= 1e-9
    assert np.abs(sol.u0_y).max() <= 1e-9


def test_flux_report_written(tmp_path):
    tensors = (PermTensor(2 * np.eye(2)), I2)
    sol = solve_darcy(DarcyProblem(SPLIT, tensors, force_sine, 32))
    path = tmp_path / "jumps.csv"
    write_flux_report(sol.interface_faces, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "face_index,x,y,normal_jump,tangential_jump"
    assert len(lines) == 1 + len(sol.interface_faces)
