import numpy as np
import pytest

from permlab.geometry import AxisSquare, rasterize_cell
from permlab.grid import (
    CellField,
    MacGrid,
    StaggeredField,
    div,
    frozen_faces,
    grad,
    grad_energy_inner,
    gradient_samples,
    lap,
    norm_l2_cell,
    norm_l2_staggered,
    periodic_grid,
    read_field,
    wall_grid,
    write_field,
)

RNG = np.random.default_rng(20240817)


def random_admissible(grid, solid=None):
    fu, fv = frozen_faces(grid, solid)
    u = RNG.standard_normal(grid.u_shape)
    v = RNG.standard_normal(grid.v_shape)
    u[fu] = 0.0
    v[fv] = 0.0
    return StaggeredField(grid, u, v)


def test_div_constant_periodic_is_zero():
    g = periodic_grid(16)
    vel = StaggeredField(g, np.ones(g.u_shape), np.zeros(g.v_shape))
    assert np.abs(div(vel).data).max() == 0.0


def test_div_linear_field_is_one():
    g = wall_grid(16)
    xu, _ = g.u_face_centers()
    vel = StaggeredField(g, xu.copy(), np.zeros(g.v_shape))
    assert np.abs(div(vel).data - 1.0).max() <= 1e-13


def test_div_matches_hand_stencil_on_2x2():
    # hand-enumerated conservative stencil on a 2x2 periodic grid
    g = periodic_grid(2)
    u = np.array([[1.0, -2.0], [3.0, 0.5]])
    v = np.array([[0.25, -1.0], [2.0, 4.0]])
    h = g.h
    expected = np.empty((2, 2))
    for i in range(2):
        for j in range(2):
            expected[i, j] = (u[(i + 1) % 2, j] - u[i, j]) / h + (v[i, (j + 1) % 2] - v[i, j]) / h
    got = div(StaggeredField(g, u, v)).data
    assert np.abs(got - expected).max() == 0.0


def test_grad_of_constant_is_zero():
    g = wall_grid(12)
    p = CellField(g, np.full(g.p_shape, 3.7))
    gp = grad(p)
    assert np.abs(gp.u).max() == 0.0
    assert np.abs(gp.v).max() == 0.0


@pytest.mark.parametrize("bc", [("periodic", "periodic"), ("wall", "wall")])
@pytest.mark.parametrize("masked", [False, True])
def test_grad_div_adjointness(bc, masked):
    g = MacGrid(16, 16, 1 / 16, bc)
    solid = rasterize_cell(AxisSquare((0.5, 0.5), 0.5), 16) if masked else None
    vel = random_admissible(g, solid)
    p = CellField(g, RNG.standard_normal(g.p_shape))
    gp = grad(p)
    h2 = g.h ** 2
    lhs = h2 * (np.sum(gp.u * vel.u) + np.sum(gp.v * vel.v))
    rhs = -h2 * np.sum(p.data * div(vel).data)
    scale = norm_l2_cell(p) * norm_l2_staggered(vel)
    assert abs(lhs - rhs) <= 1e-12 * scale


def test_lap_refinement_second_order():
    # smooth periodic field; slope of the Laplacian truncation error vs h
    errs = []
    hs = []
    for n in (16, 32, 64):
        g = periodic_grid(n)
        xu, yu = g.u_face_centers()
        field = StaggeredField(g, np.sin(2 * np.pi * xu) * np.cos(2 * np.pi * yu),
                               np.zeros(g.v_shape))
        exact = -8 * np.pi ** 2 * field.u
        got = lap(field).u
        errs.append(np.sqrt(g.h ** 2 * np.sum((got - exact) ** 2)))
        hs.append(g.h)
    slope = np.polyfit(np.log(hs), np.log(errs), 1)[0]
    assert 1.8 <= slope <= 2.2


def test_dirichlet_energy_nonnegative():
    g = periodic_grid(16)
    solid = rasterize_cell(AxisSquare((0.5, 0.5), 0.5), 16)
    for _ in range(5):
        vel = random_admissible(g, solid)
        assert grad_energy_inner(vel, vel, solid) >= 0.0


def test_energy_pairing_symmetric():
    g = wall_grid(12)
    solid = rasterize_cell(AxisSquare((0.5, 0.5), 0.5), 12)
    a = random_admissible(g, solid)
    b = random_admissible(g, solid)
    q_ab = grad_energy_inner(a, b, solid)
    q_ba = grad_energy_inner(b, a, solid)
    assert abs(q_ab - q_ba) <= 1e-12 * max(1.0, abs(q_ab))


@pytest.mark.parametrize("bc", [("periodic", "periodic"), ("wall", "wall")])
def test_norm_of_unit_field_is_one(bc):
    g = MacGrid(8, 8, 1 / 8, bc)
    vel = StaggeredField(g, np.ones(g.u_shape), np.zeros(g.v_shape))
    assert abs(norm_l2_staggered(vel) - 1.0) <= 1e-14
    p = CellField(g, np.ones(g.p_shape))
    assert abs(norm_l2_cell(p) - 1.0) <= 1e-14


def test_gradient_samples_of_linear_field():
    g = periodic_grid(8)
    xu, _ = g.u_face_centers()
    # sawtooth is linear away from the wrap; check the interior columns only
    vel = StaggeredField(g, xu.copy(), np.zeros(g.v_shape))
    s = gradient_samples(vel)
    assert np.abs(s["dudx"][:-1, :] - 1.0).max() <= 1e-13
    assert np.abs(s["dudy"]).max() <= 1e-13


def test_field_io_roundtrip(tmp_path):
    g = wall_grid(6)
    data = RNG.standard_normal(g.u_shape)
    path = tmp_path / "u.field"
    write_field(path, data, g, "face_u")
    back, h, kind = read_field(path)
    assert kind == "face_u"
    assert h == g.h
    assert np.array_equal(back, data)
