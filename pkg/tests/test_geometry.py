import numpy as np
import pytest
from scipy import ndimage

from permlab.errors import DisconnectedFluid, EpsTooLarge, ObstacleTouchesBoundary
from permlab.geometry import (
    AxisSquare,
    Disk,
    Layout,
    Polygon,
    build_perforated_mesh,
    rasterize_cell,
    write_mask_pgm,
)


def test_square_rasterization_is_exact():
    solid = rasterize_cell(AxisSquare((0.5, 0.5), 0.5), 8)
    assert solid.sum() == 16
    assert solid.mean() == 0.25


def test_disk_fraction_close_to_area():
    solid = rasterize_cell(Disk((0.5, 0.5), 0.25), 64)
    area = np.pi / 16.0
    assert abs(solid.mean() - area) <= 0.02 * area


def test_zero_margin_rejected():
    with pytest.raises(ObstacleTouchesBoundary):
        rasterize_cell(AxisSquare((0.5, 0.5), 1.0), 16)


def test_margin_violated_at_resolution():
    # positive margin, but the boundary cell ring still picks up solid centers
    with pytest.raises(ObstacleTouchesBoundary):
        rasterize_cell(AxisSquare((0.5, 0.5), 0.96), 8)


def test_disconnected_fluid_detected():
    # square annulus: outer ring solid, fluid island in the middle
    outer = [(0.2, 0.2), (0.8, 0.2), (0.8, 0.8), (0.2, 0.8)]
    inner = [(0.35, 0.35), (0.35, 0.65), (0.65, 0.65), (0.65, 0.35)]
    with pytest.raises(DisconnectedFluid):
        rasterize_cell(Polygon(tuple(outer + inner)), 40)


def test_small_n_rejected():
    with pytest.raises(ValueError):
        rasterize_cell(AxisSquare((0.5, 0.5), 0.5), 4)


def test_whole_domain_perforation_count():
    mesh = build_perforated_mesh(Layout.whole(0), [AxisSquare((0.5, 0.5), 0.5)], 0.25, 8)
    assert len(mesh.perforated[0]) == 16


def test_half_split_perforation_count():
    layout = Layout.half_split(2, 0.5, 0, 1)
    obstacles = [AxisSquare((0.5, 0.5), 0.5), AxisSquare((0.5, 0.5), 0.25)]
    mesh = build_perforated_mesh(layout, obstacles, 0.25, 8)
    assert len(mesh.perforated[0]) == 8
    assert len(mesh.perforated[1]) == 8


def test_straddling_row_left_unperforated():
    layout = Layout.half_split(2, 0.45, 0, 0)
    mesh = build_perforated_mesh(layout, [AxisSquare((0.5, 0.5), 0.5)], 0.25, 8)
    zs = set(mesh.perforated[0]) | set(mesh.perforated[1])
    assert all(z2 != 1 for _, z2 in zs)  # the row straddling 0.45
    band = mesh.solid[:, 8:16]  # fine cells of lattice row z2 = 1
    assert not band.any()


def test_eps_too_large():
    layout = Layout.half_split(2, 0.125, 0, 0)
    with pytest.raises(EpsTooLarge):
        build_perforated_mesh(layout, [AxisSquare((0.5, 0.5), 0.5)], 0.25, 8)


def test_bad_eps_rejected():
    with pytest.raises(ValueError):
        build_perforated_mesh(Layout.whole(0), [AxisSquare((0.5, 0.5), 0.5)], 0.3, 8)


def test_stamped_fraction_matches_unit_cell():
    mesh = build_perforated_mesh(Layout.whole(0), [Disk((0.5, 0.5), 0.3)], 0.25, 16)
    unit = mesh.cell_masks[0]
    m = mesh.n_per_cell
    for z1, z2 in mesh.perforated[0]:
        block = mesh.solid[z1 * m:(z1 + 1) * m, z2 * m:(z2 + 1) * m]
        assert np.array_equal(block, unit)


def test_containment_invariant():
    layout = Layout.half_split(2, 0.5, 0, 1)
    obstacles = [AxisSquare((0.5, 0.5), 0.5), Disk((0.5, 0.5), 0.2)]
    mesh = build_perforated_mesh(layout, obstacles, 0.125, 8)
    m = mesh.n_per_cell
    solid_cells = np.argwhere(mesh.solid)
    for i, j in solid_cells:
        z1, z2 = i // m, j // m
        lo = z2 * mesh.eps
        hi = (z2 + 1) * mesh.eps
        # the enclosing lattice cell must sit entirely on one side of the split
        assert hi <= 0.5 or lo >= 0.5


def test_fluid_connected_on_perforated_mesh():
    mesh = build_perforated_mesh(Layout.whole(0), [AxisSquare((0.5, 0.5), 0.5)], 0.25, 8)
    _, count = ndimage.label(~mesh.solid)
    assert count == 1


def test_pgm_dump(tmp_path):
    solid = rasterize_cell(AxisSquare((0.5, 0.5), 0.5), 8)
    path = tmp_path / "mask.pgm"
    write_mask_pgm(solid, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "P2"
    assert lines[1] == "8 8"
    assert lines[2] == "255"
    values = np.array([[int(v) for v in row.split()] for row in lines[3:]])
    assert values.shape == (8, 8)
    assert (values == 0).sum() == 16


def test_layout_validation():
    with pytest.raises(ValueError):
        Layout(((AxisSquare((0.5, 0.5), 0.5), 0),))  # not a region
    with pytest.raises(ValueError):
        Layout.half_split(3, 0.5, 0, 1)
    with pytest.raises(ValueError):
        Layout.half_split(2, 0.0, 0, 1)


def test_subdomain_of_points():
    layout = Layout.half_split(2, 0.5, 0, 1)
    x = np.array([0.2, 0.2, 0.2])
    y = np.array([0.1, 0.5, 0.9])
    assert list(layout.subdomain_of_points(x, y)) == [0, 0, 1]
