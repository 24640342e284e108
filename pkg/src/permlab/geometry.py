"""Unit-cell obstacles, domain layouts and perforated meshes.

The global domain is the unit square.  Each subdomain is perforated by
stamping the rasterized unit-cell obstacle into every lattice cell of side
eps that fits entirely inside the (closed) subdomain; lattice cells
straddling the interface keep no solid cells, so the interface band and the
cells cut by a split off the eps-lattice stay unperforated.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import DisconnectedFluid, EpsTooLarge, ObstacleTouchesBoundary
from .grid import WALL, MacGrid

BELOW = "below"
ABOVE = "above"


# ---------------------------------------------------------------------------
# obstacles


@dataclass(frozen=True)
class AxisSquare:
    """Axis-aligned square, exact on grids whose lines hit its sides."""

    center: tuple[float, float]
    side: float

    def contains(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        cx, cy = self.center
        r = self.side / 2.0
        return (np.abs(x - cx) <= r) & (np.abs(y - cy) <= r)

    def margin(self) -> float:
        cx, cy = self.center
        r = self.side / 2.0
        return min(cx - r, cy - r, 1.0 - cx - r, 1.0 - cy - r)


@dataclass(frozen=True)
class Disk:
    center: tuple[float, float]
    radius: float

    def contains(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        cx, cy = self.center
        return (x - cx) ** 2 + (y - cy) ** 2 <= self.radius ** 2

    def margin(self) -> float:
        cx, cy = self.center
        return min(cx, cy, 1.0 - cx, 1.0 - cy) - self.radius


@dataclass(frozen=True)
class Polygon:
    """Simple polygon given by its vertex list (either orientation)."""

    vertices: tuple[tuple[float, float], ...]

    def __post_init__(self):
        if len(self.vertices) < 3:
            raise ValueError("polygon needs at least 3 vertices")

    def contains(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        # even-odd crossing test, vectorized over sample points
        inside = np.zeros(np.shape(x), dtype=bool)
        vx = np.array([p[0] for p in self.vertices])
        vy = np.array([p[1] for p in self.vertices])
        n = len(vx)
        for k in range(n):
            x1, y1 = vx[k], vy[k]
            x2, y2 = vx[(k + 1) % n], vy[(k + 1) % n]
            crosses = (y1 > y) != (y2 > y)
            with np.errstate(divide="ignore", invalid="ignore"):
                xcut = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
            inside ^= crosses & (x < xcut)
        return inside

    def margin(self) -> float:
        vx = [p[0] for p in self.vertices]
        vy = [p[1] for p in self.vertices]
        return min(min(vx), min(vy), 1.0 - max(vx), 1.0 - max(vy))


ObstacleSpec = AxisSquare | Disk | Polygon


def rasterize_cell(obstacle: ObstacleSpec, n: int) -> np.ndarray:
    """Rasterize an obstacle on an n x n unit-cell grid.

    A cell is solid iff its center lies inside the obstacle.  Raises
    ObstacleTouchesBoundary when the margin is not positive or the boundary
    cell ring picks up solid cells, and DisconnectedFluid when the fluid
    complement is not 4-connected."""
    if n < 8:
        raise ValueError("rasterization needs n >= 8")
    if obstacle.margin() <= 0.0:
        raise ObstacleTouchesBoundary(
            f"obstacle margin {obstacle.margin():.3g} is not positive")
    c = (np.arange(n) + 0.5) / n
    x, y = np.meshgrid(c, c, indexing="ij")
    solid = obstacle.contains(x, y)
    ring = np.zeros_like(solid)
    ring[0, :] = ring[-1, :] = ring[:, 0] = ring[:, -1] = True
    if np.any(solid & ring):
        raise ObstacleTouchesBoundary(
            f"obstacle reaches the boundary cell ring at n={n}")
    fluid = ~solid
    labels, count = ndimage.label(fluid)
    if count != 1:
        raise DisconnectedFluid(f"fluid part splits into {count} components at n={n}")
    return solid


def write_mask_pgm(solid: np.ndarray, path) -> None:
    """Dump a fluid/solid mask as plain PGM (P2): 0 = solid, 255 = fluid.

    Image rows run top to bottom, i.e. decreasing y."""
    n1, n2 = solid.shape
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"P2\n{n1} {n2}\n255\n")
        for j in range(n2 - 1, -1, -1):
            fh.write(" ".join("0" if solid[i, j] else "255" for i in range(n1)) + "\n")


# ---------------------------------------------------------------------------
# layouts


@dataclass(frozen=True)
class WholeDomain:
    def contains_box(self, box) -> bool:
        return True

    def contains_points(self, x, y):
        return np.ones(np.shape(x), dtype=bool)


@dataclass(frozen=True)
class HalfSplit:
    """Half of the unit square cut by the axis-aligned line coord = value."""

    axis: int  # 1 or 2
    value: float
    side: str  # "below" | "above"

    def __post_init__(self):
        if self.axis not in (1, 2):
            raise ValueError("split axis must be 1 or 2")
        if not 0.0 < self.value < 1.0:
            raise ValueError("split value must lie strictly inside (0, 1)")
        if self.side not in (BELOW, ABOVE):
            raise ValueError("side must be 'below' or 'above'")

    def contains_box(self, box) -> bool:
        (x0, x1), (y0, y1) = box
        lo, hi = (x0, x1) if self.axis == 1 else (y0, y1)
        return hi <= self.value if self.side == BELOW else lo >= self.value

    def contains_points(self, x, y):
        coord = x if self.axis == 1 else y
        # points exactly on the interface count as "below"
        return coord <= self.value if self.side == BELOW else coord > self.value


Region = WholeDomain | HalfSplit


@dataclass(frozen=True)
class Layout:
    """Partition of the unit square into subdomains with microstructure ids."""

    subdomains: tuple[tuple[Region, int], ...]

    def __post_init__(self):
        regions = [r for r, _ in self.subdomains]
        if len(regions) == 1:
            if not isinstance(regions[0], WholeDomain):
                raise ValueError("a single subdomain must cover the whole domain")
        elif len(regions) == 2:
            a, b = regions
            if not (isinstance(a, HalfSplit) and isinstance(b, HalfSplit)):
                raise ValueError("two subdomains must be the two halves of one split")
            if a.axis != b.axis or a.value != b.value or a.side == b.side:
                raise ValueError("half splits must share axis and value and take opposite sides")
        else:
            raise ValueError("layouts support one or two subdomains")
        for _, mid in self.subdomains:
            if mid < 0:
                raise ValueError("microstructure ids must be nonnegative")

    @classmethod
    def whole(cls, micro_id: int = 0) -> "Layout":
        return cls(((WholeDomain(), micro_id),))

    @classmethod
    def half_split(cls, axis: int, value: float, below_id: int, above_id: int) -> "Layout":
        return cls((
            (HalfSplit(axis, value, BELOW), below_id),
            (HalfSplit(axis, value, ABOVE), above_id),
        ))

    @property
    def count(self) -> int:
        return len(self.subdomains)

    def micro_id(self, ell: int) -> int:
        return self.subdomains[ell][1]

    def subdomain_of_points(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Subdomain index for each sample point; interface points go below."""
        out = np.full(np.shape(x), -1, dtype=int)
        for ell, (region, _) in enumerate(self.subdomains):
            mask = region.contains_points(x, y)
            out[mask & (out < 0)] = ell
        return out

    def interface_value(self) -> tuple[int, float] | None:
        """(axis, value) of the flat interface, or None for a whole domain."""
        if self.count == 1:
            return None
        region = self.subdomains[0][0]
        return region.axis, region.value


# ---------------------------------------------------------------------------
# perforated meshes


@dataclass
class PerforatedMesh:
    """Global MAC grid with periodically stamped obstacles per subdomain."""

    layout: Layout
    obstacles: tuple[ObstacleSpec, ...]
    eps: float
    n_per_cell: int
    grid: MacGrid
    solid: np.ndarray              # (n, n) bool, True = solid cell
    cell_subdomain: np.ndarray     # (n, n) int, subdomain of each fine cell
    perforated: tuple[tuple[tuple[int, int], ...], ...]  # lattice cells z per subdomain
    cell_masks: tuple[np.ndarray, ...]  # rasterized unit-cell masks per microstructure

    @property
    def lattice_count(self) -> int:
        return round(1.0 / self.eps)

    def fluid_fraction(self) -> float:
        return 1.0 - float(self.solid.mean())


def build_perforated_mesh(layout: Layout, obstacles: list[ObstacleSpec] | tuple,
                          eps: float, n_per_cell: int) -> PerforatedMesh:
    """Stamp obstacles into every eps-lattice cell fully inside a subdomain.

    Raises EpsTooLarge when some subdomain ends up with no perforated cell."""
    inv = 1.0 / eps
    big_n = round(inv)
    if abs(inv - big_n) > 1e-12 or big_n < 1:
        raise ValueError(f"eps={eps} is not the reciprocal of an integer")
    needed = max(layout.micro_id(ell) for ell in range(layout.count))
    if needed >= len(obstacles):
        raise ValueError("layout references a microstructure id with no obstacle")
    masks = tuple(rasterize_cell(ob, n_per_cell) for ob in obstacles)

    m = n_per_cell
    n = big_n * m
    grid = MacGrid(n, n, 1.0 / n, (WALL, WALL))
    solid = np.zeros((n, n), dtype=bool)
    per_sub: list[list[tuple[int, int]]] = [[] for _ in range(layout.count)]

    for z1 in range(big_n):
        for z2 in range(big_n):
            box = ((z1 * eps, (z1 + 1) * eps), (z2 * eps, (z2 + 1) * eps))
            owners = [ell for ell, (region, _) in enumerate(layout.subdomains)
                      if region.contains_box(box)]
            if len(owners) != 1:
                continue  # straddles the interface: left unperforated
            ell = owners[0]
            mask = masks[layout.micro_id(ell)]
            solid[z1 * m:(z1 + 1) * m, z2 * m:(z2 + 1) * m] = mask
            per_sub[ell].append((z1, z2))

    empty = [ell for ell, cells in enumerate(per_sub) if not cells]
    if empty:
        raise EpsTooLarge(
            f"subdomains {empty} receive no perforated lattice cell at eps={eps}")

    xc, yc = grid.cell_centers()
    cell_subdomain = layout.subdomain_of_points(xc, yc)

    return PerforatedMesh(
        layout=layout,
        obstacles=tuple(obstacles),
        eps=eps,
        n_per_cell=n_per_cell,
        grid=grid,
        solid=solid,
        cell_subdomain=cell_subdomain,
        perforated=tuple(tuple(cells) for cells in per_sub),
        cell_masks=masks,
    )


def assert_fluid_connected(solid: np.ndarray) -> None:
    labels, count = ndimage.label(~solid)
    if count != 1:
        raise DisconnectedFluid(f"fluid region splits into {count} components")
