import numpy as np
import pytest

from permlab.fine import extend_pressure, sample_force, solve_fine
from permlab.geometry import AxisSquare, Layout, build_perforated_mesh
from permlab.grid import CellField, frozen_faces, norm_l2_cell, norm_l2_staggered


@pytest.fixture(scope="module")
def mesh_quarter():
    return build_perforated_mesh(Layout.whole(0), [AxisSquare((0.5, 0.5), 0.5)], 0.25, 8)


def force_const(f1, f2):
    return lambda x, y: (np.full(np.shape(x), f1), np.full(np.shape(x), f2))


def test_zero_force_zero_solution(mesh_quarter):
    sol = solve_fine(mesh_quarter, force_const(0.0, 0.0))
    assert np.abs(sol.u.u).max() == 0.0
    assert np.abs(sol.p.data).max() == 0.0
    assert np.abs(sol.P_ext.data).max() == 0.0


def test_no_slip_everywhere(mesh_quarter):
    sol = solve_fine(mesh_quarter, force_const(0.0, 1.0))
    fu, fv = frozen_faces(mesh_quarter.grid, mesh_quarter.solid)
    assert np.abs(sol.u.u[fu]).max() == 0.0
    assert np.abs(sol.u.v[fv]).max() == 0.0
    assert np.abs(sol.u.u[0, :]).max() == 0.0
    assert np.abs(sol.u.u[-1, :]).max() == 0.0
    assert np.abs(sol.u.v[:, 0]).max() == 0.0
    assert np.abs(sol.u.v[:, -1]).max() == 0.0


def test_energy_and_poincare_monitors_stable():
    consts = []
    ratios = []
    for eps in (1 / 4, 1 / 8, 1 / 16):
        mesh = build_perforated_mesh(Layout.whole(0), [AxisSquare((0.5, 0.5), 0.5)], eps, 8)
        sol = solve_fine(mesh, force_const(0.0, 1.0))
        consts.append(sol.energy_monitor)
        ratios.append(sol.poincare_monitor)
    assert max(consts) / min(consts) <= 2.0
    assert max(ratios) / min(ratios) <= 2.0


def test_extension_of_constant_pressure(mesh_quarter):
    g = mesh_quarter.grid
    p = CellField(g, np.where(~mesh_quarter.solid, 2.5, 0.0))
    ext = extend_pressure(p, mesh_quarter)
    assert np.abs(ext.data - 2.5).max() <= 1e-14


def test_extension_matches_hand_average(mesh_quarter):
    # synthetic pressure on one 8x8 lattice cell; hand-enumerated fluid mean
    g = mesh_quarter.grid
    m = mesh_quarter.n_per_cell
    data = np.zeros(g.p_shape)
    z1, z2 = mesh_quarter.perforated[0][0]
    block = np.arange(m * m, dtype=float).reshape(m, m)
    data[z1 * m:(z1 + 1) * m, z2 * m:(z2 + 1) * m] = block
    mask = mesh_quarter.cell_masks[0]
    data[z1 * m:(z1 + 1) * m, z2 * m:(z2 + 1) * m][mask] = 0.0

    expected = block[~mask].sum() / (~mask).sum()
    ext = extend_pressure(CellField(g, data), mesh_quarter)
    got = ext.data[z1 * m:(z1 + 1) * m, z2 * m:(z2 + 1) * m][mask]
    assert np.abs(got - expected).max() <= 1e-13


def test_extension_idempotent(mesh_quarter):
    sol = solve_fine(mesh_quarter, force_const(0.0, 1.0))
    once = extend_pressure(sol.p, mesh_quarter)
    twice = extend_pressure(once, mesh_quarter)
    assert np.array_equal(once.data, twice.data)


def test_extension_norm_bound(mesh_quarter):
    sol = solve_fine(mesh_quarter, force_const(0.0, 1.0))
    fluid = ~mesh_quarter.solid
    bound = norm_l2_cell(sol.p, fluid) / np.sqrt(1.0 - mesh_quarter.cell_masks[0].mean())
    assert norm_l2_cell(sol.P_ext) <= bound * (1.0 + 1e-12)


def test_zero_extension_norm_consistency(mesh_quarter):
    sol = solve_fine(mesh_quarter, force_const(0.0, 1.0))
    full = norm_l2_staggered(sol.u)
    fu, fv = frozen_faces(mesh_quarter.grid, mesh_quarter.solid)
    masked = norm_l2_staggered(sol.u, mask_u=~fu, mask_v=~fv)
    assert abs(full - masked) <= 1e-15


def test_sample_force_positions(mesh_quarter):
    f = sample_force(mesh_quarter, lambda x, y: (x, 2.0 * y))
    g = mesh_quarter.grid
    xu, _ = g.u_face_centers()
    _, yv = g.v_face_centers()
    assert np.abs(f.u - xu).max() == 0.0
    assert np.abs(f.v - 2.0 * yv).max() == 0.0
