"""MAC staggered-grid calculus on the unit square.

Grid layout (arrays indexed [i, j], axis 0 = x, axis 1 = y):

    p[i, j]   cell centers:      x=(i+0.5)h, y=(j+0.5)h   shape (n1, n2)
    u[i, j]   vertical faces:    x=i*h,      y=(j+0.5)h
    v[i, j]   horizontal faces:  x=(i+0.5)h, y=j*h

Per direction the boundary mode is either "periodic" (face count equals
cell count, index wraparound) or "wall" (one extra face layer; the two
boundary faces carry the no-slip value 0).

Solid cells freeze every adjacent normal face to 0.  The vector Laplacian
treats a frozen neighbor as a homogeneous Dirichlet value, except when the
neighbor position lies strictly inside the solid (both cells next to it
solid) or beyond a tangential wall, where the ghost value is the no-slip
reflection -u of the center face.  This is second order along straight
obstacle walls and first order at staircase corners.

div and grad are exact negative adjoints of each other, which is what makes
the pressure Schur complement symmetric.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PERIODIC = "periodic"
WALL = "wall"


@dataclass(frozen=True)
class MacGrid:
    """Uniform staggered grid on [0, n1*h] x [0, n2*h]."""

    n1: int
    n2: int
    h: float
    bc: tuple[str, str] = (PERIODIC, PERIODIC)

    def __post_init__(self):
        if self.n1 < 1 or self.n2 < 1 or self.h <= 0:
            raise ValueError("grid needs positive cell counts and mesh size")
        for mode in self.bc:
            if mode not in (PERIODIC, WALL):
                raise ValueError(f"unknown boundary mode {mode!r}")

    @property
    def u_shape(self) -> tuple[int, int]:
        n1 = self.n1 if self.bc[0] == PERIODIC else self.n1 + 1
        return (n1, self.n2)

    @property
    def v_shape(self) -> tuple[int, int]:
        n2 = self.n2 if self.bc[1] == PERIODIC else self.n2 + 1
        return (self.n1, n2)

    @property
    def p_shape(self) -> tuple[int, int]:
        return (self.n1, self.n2)

    def cell_centers(self) -> tuple[np.ndarray, np.ndarray]:
        x = (np.arange(self.n1) + 0.5) * self.h
        y = (np.arange(self.n2) + 0.5) * self.h
        return np.meshgrid(x, y, indexing="ij")

    def u_face_centers(self) -> tuple[np.ndarray, np.ndarray]:
        nu1 = self.u_shape[0]
        x = np.arange(nu1) * self.h
        y = (np.arange(self.n2) + 0.5) * self.h
        return np.meshgrid(x, y, indexing="ij")

    def v_face_centers(self) -> tuple[np.ndarray, np.ndarray]:
        nv2 = self.v_shape[1]
        x = (np.arange(self.n1) + 0.5) * self.h
        y = np.arange(nv2) * self.h
        return np.meshgrid(x, y, indexing="ij")


def periodic_grid(n: int, side: float = 1.0) -> MacGrid:
    return MacGrid(n, n, side / n, (PERIODIC, PERIODIC))


def wall_grid(n: int, side: float = 1.0) -> MacGrid:
    return MacGrid(n, n, side / n, (WALL, WALL))


@dataclass
class StaggeredField:
    """Velocity-valued field: u on vertical faces, v on horizontal faces."""

    grid: MacGrid
    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        if self.u.shape != self.grid.u_shape or self.v.shape != self.grid.v_shape:
            raise ValueError("component shapes do not match the grid")

    @classmethod
    def zeros(cls, grid: MacGrid) -> "StaggeredField":
        return cls(grid, np.zeros(grid.u_shape), np.zeros(grid.v_shape))

    def copy(self) -> "StaggeredField":
        return StaggeredField(self.grid, self.u.copy(), self.v.copy())


@dataclass
class CellField:
    """Scalar per cell (pressure or scalar data)."""

    grid: MacGrid
    data: np.ndarray

    def __post_init__(self):
        if self.data.shape != self.grid.p_shape:
            raise ValueError("cell data shape does not match the grid")

    @classmethod
    def zeros(cls, grid: MacGrid) -> "CellField":
        return cls(grid, np.zeros(grid.p_shape))

    def copy(self) -> "CellField":
        return CellField(self.grid, self.data.copy())


# ---------------------------------------------------------------------------
# face masks


def frozen_faces(grid: MacGrid, solid: np.ndarray | None) -> tuple[np.ndarray, np.ndarray]:
    """Boolean masks of faces pinned to 0: wall boundary faces and faces
    touching a solid cell."""
    if solid is None:
        solid = np.zeros(grid.p_shape, dtype=bool)
    fu = np.zeros(grid.u_shape, dtype=bool)
    fv = np.zeros(grid.v_shape, dtype=bool)
    if grid.bc[0] == PERIODIC:
        fu |= solid | np.roll(solid, 1, axis=0)
    else:
        fu[0, :] = True
        fu[-1, :] = True
        fu[1:-1, :] |= solid[:-1, :] | solid[1:, :]
    if grid.bc[1] == PERIODIC:
        fv |= solid | np.roll(solid, 1, axis=1)
    else:
        fv[:, 0] = True
        fv[:, -1] = True
        fv[:, 1:-1] |= solid[:, :-1] | solid[:, 1:]
    return fu, fv


# ---------------------------------------------------------------------------
# first-order operators


def div(vel: StaggeredField) -> CellField:
    """Conservative face-difference divergence, one value per cell."""
    g = vel.grid
    h = g.h
    if g.bc[0] == PERIODIC:
        dudx = (np.roll(vel.u, -1, axis=0) - vel.u) / h
    else:
        dudx = (vel.u[1:, :] - vel.u[:-1, :]) / h
    if g.bc[1] == PERIODIC:
        dvdy = (np.roll(vel.v, -1, axis=1) - vel.v) / h
    else:
        dvdy = (vel.v[:, 1:] - vel.v[:, :-1]) / h
    return CellField(g, dudx + dvdy)


def grad(p: CellField) -> StaggeredField:
    """Face-centered pressure gradient; the exact negative adjoint of div.

    Wall boundary faces get 0 (they never carry velocity unknowns)."""
    g = p.grid
    h = g.h
    d = p.data
    if g.bc[0] == PERIODIC:
        gu = (d - np.roll(d, 1, axis=0)) / h
    else:
        gu = np.zeros(g.u_shape)
        gu[1:-1, :] = (d[1:, :] - d[:-1, :]) / h
    if g.bc[1] == PERIODIC:
        gv = (d - np.roll(d, 1, axis=1)) / h
    else:
        gv = np.zeros(g.v_shape)
        gv[:, 1:-1] = (d[:, 1:] - d[:, :-1]) / h
    return StaggeredField(g, gu, gv)


def _component_lap(a: np.ndarray, grid: MacGrid, solid: np.ndarray, axis_normal: int) -> np.ndarray:
    """5-point Laplacian of one velocity component with no-slip handling.

    ``axis_normal`` is the axis the component is normal to (0 for u, 1 for v).
    Frozen faces contribute their stored value 0; positions strictly inside
    the solid or beyond a tangential wall contribute the reflection -a."""
    h2 = grid.h * grid.h
    out = -4.0 * a
    axis_tan = 1 - axis_normal

    # normal-direction neighbors: same component one cell over
    if grid.bc[axis_normal] == PERIODIC:
        out += np.roll(a, 1, axis=axis_normal) + np.roll(a, -1, axis=axis_normal)
    else:
        lo = [slice(None), slice(None)]
        hi = [slice(None), slice(None)]
        lo[axis_normal] = slice(0, -1)
        hi[axis_normal] = slice(1, None)
        shifted = np.zeros_like(a)
        shifted[tuple(hi)] += a[tuple(lo)]
        shifted[tuple(lo)] += a[tuple(hi)]
        out += shifted

    # tangential-direction neighbors, with reflection beyond walls
    if grid.bc[axis_tan] == PERIODIC:
        out += np.roll(a, 1, axis=axis_tan) + np.roll(a, -1, axis=axis_tan)
    else:
        shifted = np.zeros_like(a)
        lo = [slice(None), slice(None)]
        hi = [slice(None), slice(None)]
        lo[axis_tan] = slice(0, -1)
        hi[axis_tan] = slice(1, None)
        shifted[tuple(hi)] += a[tuple(lo)]
        shifted[tuple(lo)] += a[tuple(hi)]
        first = [slice(None), slice(None)]
        last = [slice(None), slice(None)]
        first[axis_tan] = 0
        last[axis_tan] = -1
        shifted[tuple(first)] += -a[tuple(first)]
        shifted[tuple(last)] += -a[tuple(last)]
        out += shifted

    # tangential neighbors buried in the solid reflect as well
    refl = _interior_reflection_count(grid, solid, axis_normal)
    out -= refl * a
    return out / h2


def _interior_reflection_count(grid: MacGrid, solid: np.ndarray, axis_normal: int) -> np.ndarray:
    """Per-face count of tangential neighbors whose both adjacent cells are
    solid (reflection slots inside obstacles)."""
    axis_tan = 1 - axis_normal
    # "deep" faces: both cells adjacent to the face are solid
    if grid.bc[axis_normal] == PERIODIC:
        deep = solid & np.roll(solid, 1, axis=axis_normal)
    else:
        shape = grid.u_shape if axis_normal == 0 else grid.v_shape
        deep = np.zeros(shape, dtype=bool)
        lo = [slice(None), slice(None)]
        hi = [slice(None), slice(None)]
        lo[axis_normal] = slice(0, -1)
        hi[axis_normal] = slice(1, None)
        sl = [slice(None), slice(None)]
        sl[axis_normal] = slice(1, -1)
        deep[tuple(sl)] = solid[tuple(lo)] & solid[tuple(hi)]
    count = np.zeros(deep.shape)
    if grid.bc[axis_tan] == PERIODIC:
        count += np.roll(deep, 1, axis=axis_tan) + np.roll(deep, -1, axis=axis_tan)
    else:
        lo = [slice(None), slice(None)]
        hi = [slice(None), slice(None)]
        lo[axis_tan] = slice(0, -1)
        hi[axis_tan] = slice(1, None)
        add = np.zeros_like(count)
        add[tuple(hi)] += deep[tuple(lo)]
        add[tuple(lo)] += deep[tuple(hi)]
        count += add
    return count


def lap(vel: StaggeredField, solid: np.ndarray | None = None) -> StaggeredField:
    """Compatible 5-point vector Laplacian with no-slip values reflected at
    solid faces.  Values on frozen faces are not meaningful and are zeroed."""
    g = vel.grid
    if solid is None:
        solid = np.zeros(g.p_shape, dtype=bool)
    lu = _component_lap(vel.u, g, solid, 0)
    lv = _component_lap(vel.v, g, solid, 1)
    fu, fv = frozen_faces(g, solid)
    lu[fu] = 0.0
    lv[fv] = 0.0
    return StaggeredField(g, lu, lv)


# ---------------------------------------------------------------------------
# inner products and norms


def face_weights(grid: MacGrid) -> tuple[np.ndarray, np.ndarray]:
    """Quadrature weights (units of h^2) per face; wall boundary normal faces
    count half so that the norm of the constant field 1 is exactly the domain
    area."""
    wu = np.full(grid.u_shape, grid.h * grid.h)
    wv = np.full(grid.v_shape, grid.h * grid.h)
    if grid.bc[0] == WALL:
        wu[0, :] *= 0.5
        wu[-1, :] *= 0.5
    if grid.bc[1] == WALL:
        wv[:, 0] *= 0.5
        wv[:, -1] *= 0.5
    return wu, wv


def norm_l2_staggered(vel: StaggeredField, mask_u: np.ndarray | None = None,
                      mask_v: np.ndarray | None = None) -> float:
    wu, wv = face_weights(vel.grid)
    if mask_u is not None:
        wu = wu * mask_u
    if mask_v is not None:
        wv = wv * mask_v
    return float(np.sqrt(np.sum(wu * vel.u ** 2) + np.sum(wv * vel.v ** 2)))


def norm_l2_cell(p: CellField, mask: np.ndarray | None = None) -> float:
    w = p.grid.h ** 2
    d = p.data if mask is None else p.data * mask
    return float(np.sqrt(w * np.sum(d ** 2)))


def inner_staggered(a: StaggeredField, b: StaggeredField) -> float:
    wu, wv = face_weights(a.grid)
    return float(np.sum(wu * a.u * b.u) + np.sum(wv * a.v * b.v))


def inner_cell(a: CellField, b: CellField) -> float:
    return float(a.grid.h ** 2 * np.sum(a.data * b.data))


def grad_energy_inner(a: StaggeredField, b: StaggeredField,
                      solid: np.ndarray | None = None) -> float:
    """Discrete Dirichlet form <grad a, grad b>, the exact energy pairing of
    ``lap``: <-lap a, b> h^2.  Symmetric in (a, b) up to roundoff."""
    la = lap(a, solid)
    h2 = a.grid.h ** 2
    return float(-h2 * (np.sum(la.u * b.u) + np.sum(la.v * b.v)))


# ---------------------------------------------------------------------------
# gradient samples (for gradient norms and two-scale comparisons)


def gradient_samples(vel: StaggeredField) -> dict[str, np.ndarray]:
    """Plain difference quotients of both components at their natural
    positions.

    dudx, dvdy live at cell centers.  dudy and dvdx live at the transverse
    positions between consecutive faces; in a wall direction the two
    half-differences hugging the wall are omitted, in a periodic direction the
    wraparound row is included.  All returned arrays carry plain h^2 weight in
    norms."""
    g = vel.grid
    h = g.h
    out: dict[str, np.ndarray] = {}
    if g.bc[0] == PERIODIC:
        out["dudx"] = (np.roll(vel.u, -1, axis=0) - vel.u) / h
    else:
        out["dudx"] = (vel.u[1:, :] - vel.u[:-1, :]) / h
    if g.bc[1] == PERIODIC:
        out["dvdy"] = (np.roll(vel.v, -1, axis=1) - vel.v) / h
    else:
        out["dvdy"] = (vel.v[:, 1:] - vel.v[:, :-1]) / h
    if g.bc[1] == PERIODIC:
        out["dudy"] = (vel.u - np.roll(vel.u, 1, axis=1)) / h
    else:
        out["dudy"] = (vel.u[:, 1:] - vel.u[:, :-1]) / h
    if g.bc[0] == PERIODIC:
        out["dvdx"] = (vel.v - np.roll(vel.v, 1, axis=0)) / h
    else:
        out["dvdx"] = (vel.v[1:, :] - vel.v[:-1, :]) / h
    return out


def norm_l2_gradient(vel: StaggeredField) -> float:
    s = gradient_samples(vel)
    h2 = vel.grid.h ** 2
    total = sum(float(np.sum(a ** 2)) for a in s.values())
    return float(np.sqrt(h2 * total))


def project_zero_mean(p: CellField, support: np.ndarray | None = None) -> CellField:
    """Subtract the mean over the given support (default: all cells)."""
    if support is None:
        mean = p.data.mean()
        return CellField(p.grid, p.data - mean)
    data = p.data.copy()
    mean = data[support].mean()
    data[support] -= mean
    return CellField(p.grid, data)


# ---------------------------------------------------------------------------
# plain-text field I/O (header: n1 n2 h kind, then row-major values)

_KINDS = ("cell", "face_u", "face_v")


def write_field(path, array: np.ndarray, grid: MacGrid, kind: str) -> None:
    if kind not in _KINDS:
        raise ValueError(f"kind must be one of {_KINDS}")
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"{array.shape[0]} {array.shape[1]} {grid.h:.17g} {kind}\n")
        for row in array:
            fh.write(" ".join(f"{x:.17g}" for x in row) + "\n")


def read_field(path) -> tuple[np.ndarray, float, str]:
    with open(path, encoding="ascii") as fh:
        head = fh.readline().split()
        if len(head) != 4 or head[3] not in _KINDS:
            raise ValueError(f"not a field file: {path}")
        m1, m2 = int(head[0]), int(head[1])
        h = float(head[2])
        data = np.loadtxt(fh, ndmin=2)
    if data.shape != (m1, m2):
        raise ValueError(f"field file {path}: expected shape {(m1, m2)}, got {data.shape}")
    return data, h, head[3]
