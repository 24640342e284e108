"""Effective Darcy problem with piecewise-constant permeability.

Cell-centered finite volumes on the unit square for

    div( K (f - grad P0) ) = 0,   n . K (f - grad P0) = h_n on the boundary,

with K constant per subdomain.  Every interior face carries one flux built
from the two adjacent cells: the normal part uses the two-point difference
with the harmonic transmissibility of the one-sided normal permeabilities,
the tangential (off-diagonal K) part uses one-sided tangential pressure
differences that never cross the interface.  On faces interior to one
subdomain this reduces to the standard central scheme; on interface faces
it enforces pressure continuity and a single-valued normal flux exactly.

The pressure null space (constants) is pinned during the direct solve and
removed by mean projection afterwards.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

from .cell import PermTensor, eigenvalues
from .errors import IncompatibleFlux, SingularK
from .geometry import Layout
from .grid import WALL, CellField, MacGrid

DEFAULT_TOL = 1e-10

ForceFn = "callable (x, y) -> (f1, f2), vectorized over arrays"


@dataclass
class DarcyProblem:
    layout: Layout
    tensors: tuple[PermTensor, ...]   # one per subdomain
    force: object                     # ForceFn
    n: int                            # cells per side
    boundary_flux: object | None = None  # callable (x, y, nx, ny) -> u0.n

    def __post_init__(self):
        if len(self.tensors) != self.layout.count:
            raise ValueError("need one permeability tensor per subdomain")
        for t in self.tensors:
            m = t.matrix
            if abs(m[0, 1] - m[1, 0]) > 1e-8 or eigenvalues(m).min() <= 0.0:
                raise SingularK("permeability tensor is not symmetric positive definite")


@dataclass
class InterfaceFace:
    index: int
    axis: int          # normal axis: 0 for vertical faces, 1 for horizontal
    i: int
    j: int
    x: float
    y: float
    normal_jump: float
    tangential_jump: float


@dataclass
class DarcySolution:
    grid: MacGrid
    problem: DarcyProblem
    P0: CellField                      # zero mean over the domain
    qx: np.ndarray                     # (n+1, n) face fluxes in +x
    qy: np.ndarray                     # (n, n+1) face fluxes in +y
    cell_id: np.ndarray                # (n, n) subdomain index per cell
    grad_x: np.ndarray                 # one-sided per subdomain, cell centers
    grad_y: np.ndarray
    u0_x: np.ndarray                   # K_cell (f - grad P0), cell centers
    u0_y: np.ndarray
    conservation_residual: float
    interface_faces: list[InterfaceFace] = field(default_factory=list)

    def u0_subdomain(self, ell: int) -> tuple[np.ndarray, np.ndarray]:
        mask = self.cell_id == ell
        return np.where(mask, self.u0_x, 0.0), np.where(mask, self.u0_y, 0.0)

    def grad_subdomain(self, ell: int) -> tuple[np.ndarray, np.ndarray]:
        mask = self.cell_id == ell
        return np.where(mask, self.grad_x, 0.0), np.where(mask, self.grad_y, 0.0)


def _tangential_coeffs(cell_id: np.ndarray, axis: int, h: float):
    """Per-cell stencil (c_plus, c_center, c_minus) of the tangential pressure
    derivative along ``axis``: central between same-subdomain neighbors,
    one-sided next to the interface or a wall."""
    n1, n2 = cell_id.shape
    same_p = np.zeros_like(cell_id, dtype=bool)
    same_m = np.zeros_like(cell_id, dtype=bool)
    if axis == 0:
        same_p[:-1, :] = cell_id[:-1, :] == cell_id[1:, :]
        same_m[1:, :] = cell_id[1:, :] == cell_id[:-1, :]
    else:
        same_p[:, :-1] = cell_id[:, :-1] == cell_id[:, 1:]
        same_m[:, 1:] = cell_id[:, 1:] == cell_id[:, :-1]
    both = same_p & same_m
    cp = np.where(both, 0.5 / h, np.where(same_p, 1.0 / h, 0.0))
    cm = np.where(both, -0.5 / h, np.where(~same_p & same_m, -1.0 / h, 0.0))
    cc = np.where(both, 0.0, np.where(same_p, -1.0 / h, np.where(same_m, 1.0 / h, 0.0)))
    return cp, cc, cm


def _apply_tangential(p: np.ndarray, coeffs, axis: int) -> np.ndarray:
    cp, cc, cm = coeffs
    plus = np.roll(p, -1, axis=axis)
    minus = np.roll(p, 1, axis=axis)
    # rolled wraparound entries always meet zero coefficients
    return cp * plus + cc * p + cm * minus


def _cell_tensor_fields(layout: Layout, tensors, cell_id):
    k11 = np.empty(cell_id.shape)
    k12 = np.empty(cell_id.shape)
    k22 = np.empty(cell_id.shape)
    for ell in range(layout.count):
        m = tensors[ell].matrix
        sel = cell_id == ell
        k11[sel] = m[0, 0]
        k12[sel] = 0.5 * (m[0, 1] + m[1, 0])
        k22[sel] = m[1, 1]
    return k11, k12, k22


def solve_darcy(problem: DarcyProblem, tol: float = DEFAULT_TOL,
                seed_pressure: np.ndarray | None = None) -> DarcySolution:
    """Assemble and solve the conservation system by sparse LU.

    ``seed_pressure`` solves for the correction around a given start instead
    of the raw system; the mean-projected result is identical up to roundoff
    ("unique up to constants")."""
    n = problem.n
    h = 1.0 / n
    grid = MacGrid(n, n, h, (WALL, WALL))
    xc, yc = grid.cell_centers()
    cell_id = problem.layout.subdomain_of_points(xc, yc)
    k11, k12, k22 = _cell_tensor_fields(problem.layout, problem.tensors, cell_id)

    fx_cell, fy_cell = problem.force(xc, yc)
    fx_cell = np.broadcast_to(fx_cell, (n, n)).astype(float)
    fy_cell = np.broadcast_to(fy_cell, (n, n)).astype(float)

    coeff_x = _tangential_coeffs(cell_id, 0, h)
    coeff_y = _tangential_coeffs(cell_id, 1, h)

    def cid(i, j):
        return i * n + j

    rows_x, cols_x, vals_x = [], [], []
    rows_y, cols_y, vals_y = [], [], []

    # ---- vertical faces (normal +x), interior i = 1..n-1
    ii, jj = np.meshgrid(np.arange(1, n), np.arange(n), indexing="ij")
    li, lj = ii - 1, jj
    ri, rj = ii, jj
    a_l = 2.0 * k11[li, lj] / h
    a_r = 2.0 * k11[ri, rj] / h
    denom = a_l + a_r
    trans = a_l * a_r / denom
    w_l = -a_r * k12[li, lj] / denom
    w_r = -a_l * k12[ri, rj] / denom
    fid = ii * n + jj

    xf = ii * h
    yf = (jj + 0.5) * h
    f1f, f2f = problem.force(xf, yf)
    f1f = np.broadcast_to(f1f, fid.shape).astype(float)
    f2f = np.broadcast_to(f2f, fid.shape).astype(float)
    q0x = np.zeros((n + 1, n))
    q0x[1:-1, :] = (a_l * (k11[ri, rj] * f1f + k12[ri, rj] * f2f)
                    + a_r * (k11[li, lj] * f1f + k12[li, lj] * f2f)) / denom

    cp, cc, cm = coeff_y
    def push_x(r, c, v):
        rows_x.append(r.ravel()); cols_x.append(c.ravel()); vals_x.append(v.ravel())

    push_x(fid, cid(li, lj), trans + w_l * cc[li, lj])
    push_x(fid, cid(ri, rj), -trans + w_r * cc[ri, rj])
    up = np.minimum(lj + 1, n - 1)
    dn = np.maximum(lj - 1, 0)
    push_x(fid, cid(li, up), w_l * cp[li, lj])
    push_x(fid, cid(li, dn), w_l * cm[li, lj])
    push_x(fid, cid(ri, up), w_r * cp[ri, rj])
    push_x(fid, cid(ri, dn), w_r * cm[ri, rj])

    # ---- horizontal faces (normal +y), interior j = 1..n-1
    ii, jj = np.meshgrid(np.arange(n), np.arange(1, n), indexing="ij")
    bi, bj = ii, jj - 1
    ti, tj = ii, jj
    a_b = 2.0 * k22[bi, bj] / h
    a_t = 2.0 * k22[ti, tj] / h
    denom = a_b + a_t
    trans = a_b * a_t / denom
    w_b = -a_t * k12[bi, bj] / denom
    w_t = -a_b * k12[ti, tj] / denom
    fid = ii * (n + 1) + jj

    xf = (ii + 0.5) * h
    yf = jj * h
    f1f, f2f = problem.force(xf, yf)
    f1f = np.broadcast_to(f1f, fid.shape).astype(float)
    f2f = np.broadcast_to(f2f, fid.shape).astype(float)
    q0y = np.zeros((n, n + 1))
    q0y[:, 1:-1] = (a_b * (k22[ti, tj] * f2f + k12[ti, tj] * f1f)
                    + a_t * (k22[bi, bj] * f2f + k12[bi, bj] * f1f)) / denom

    cp, cc, cm = coeff_x
    def push_y(r, c, v):
        rows_y.append(r.ravel()); cols_y.append(c.ravel()); vals_y.append(v.ravel())

    push_y(fid, cid(bi, bj), trans + w_b * cc[bi, bj])
    push_y(fid, cid(ti, tj), -trans + w_t * cc[ti, tj])
    rt = np.minimum(bi + 1, n - 1)
    lt = np.maximum(bi - 1, 0)
    push_y(fid, cid(rt, bj), w_b * cp[bi, bj])
    push_y(fid, cid(lt, bj), w_b * cm[bi, bj])
    push_y(fid, cid(rt, tj), w_t * cp[ti, tj])
    push_y(fid, cid(lt, tj), w_t * cm[ti, tj])

    # ---- prescribed boundary fluxes
    if problem.boundary_flux is not None:
        bf = problem.boundary_flux
        ys = (np.arange(n) + 0.5) * h
        xs = (np.arange(n) + 0.5) * h
        q0x[0, :] = -np.broadcast_to(bf(0.0, ys, -1.0, 0.0), (n,))
        q0x[-1, :] = np.broadcast_to(bf(1.0, ys, 1.0, 0.0), (n,))
        q0y[:, 0] = -np.broadcast_to(bf(xs, 0.0, 0.0, -1.0), (n,))
        q0y[:, -1] = np.broadcast_to(bf(xs, 1.0, 0.0, 1.0), (n,))
        net = h * (q0x[-1, :].sum() - q0x[0, :].sum()
                   + q0y[:, -1].sum() - q0y[:, 0].sum())
        if abs(net) > 1e-12:
            raise IncompatibleFlux(f"net boundary flux {net:.3e} violates compatibility")

    n_xf = (n + 1) * n
    n_yf = n * (n + 1)
    q_x = sparse.coo_matrix(
        (np.concatenate(vals_x), (np.concatenate(rows_x), np.concatenate(cols_x))),
        shape=(n_xf, n * n)).tocsr()
    q_y = sparse.coo_matrix(
        (np.concatenate(vals_y), (np.concatenate(rows_y), np.concatenate(cols_y))),
        shape=(n_yf, n * n)).tocsr()

    # conservation: outflux balance per cell, scaled by the face length h
    ci, cj = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    cells = cid(ci, cj).ravel()
    d_x = sparse.coo_matrix(
        (np.concatenate([np.ones(n * n), -np.ones(n * n)]),
         (np.concatenate([cells, cells]),
          np.concatenate([((ci + 1) * n + cj).ravel(), (ci * n + cj).ravel()]))),
        shape=(n * n, n_xf)).tocsr()
    d_y = sparse.coo_matrix(
        (np.concatenate([np.ones(n * n), -np.ones(n * n)]),
         (np.concatenate([cells, cells]),
          np.concatenate([(ci * (n + 1) + cj + 1).ravel(), (ci * (n + 1) + cj).ravel()]))),
        shape=(n * n, n_yf)).tocsr()

    mat = (h * (d_x @ q_x + d_y @ q_y)).tolil()
    rhs = -h * (d_x @ q0x.ravel() + d_y @ q0y.ravel())
    mat[0, :] = 0.0
    mat[0, 0] = 1.0
    lu = splu(mat.tocsc())
    if seed_pressure is None:
        p_flat = lu.solve(np.concatenate([[0.0], rhs[1:]]))
    else:
        seed = seed_pressure.ravel()
        full = (h * (d_x @ q_x + d_y @ q_y)) @ seed
        rhs_corr = rhs - full
        rhs_corr[0] = -seed[0]
        p_flat = seed + lu.solve(rhs_corr)
    p_flat = p_flat - p_flat.mean()

    qx = q0x + (q_x @ p_flat).reshape(n + 1, n)
    qy = q0y + (q_y @ p_flat).reshape(n, n + 1)
    resid = h * (qx[1:, :] - qx[:-1, :] + qy[:, 1:] - qy[:, :-1])
    conservation = float(np.abs(resid).max())

    p = p_flat.reshape(n, n)
    gx = _apply_tangential(p, coeff_x, 0)
    gy = _apply_tangential(p, coeff_y, 1)
    u0x = k11 * (fx_cell - gx) + k12 * (fy_cell - gy)
    u0y = k12 * (fx_cell - gx) + k22 * (fy_cell - gy)

    sol = DarcySolution(
        grid=grid,
        problem=problem,
        P0=CellField(grid, p),
        qx=qx,
        qy=qy,
        cell_id=cell_id,
        grad_x=gx,
        grad_y=gy,
        u0_x=u0x,
        u0_y=u0y,
        conservation_residual=conservation,
    )
    sol.interface_faces = _interface_report(sol, k11, k12, k22, coeff_x, coeff_y)
    return sol


def _interface_report(sol: DarcySolution, k11, k12, k22, coeff_x, coeff_y) -> list[InterfaceFace]:
    """One-sided velocity traces on faces separating different subdomains."""
    n = sol.grid.n1
    h = sol.grid.h
    p = sol.P0.data
    cell_id = sol.cell_id
    force = sol.problem.force
    dx_p = _apply_tangential(p, coeff_x, 0)
    dy_p = _apply_tangential(p, coeff_y, 1)
    out: list[InterfaceFace] = []
    index = 0

    # horizontal faces between vertically adjacent cells of different subdomains
    for i in range(n):
        for j in range(1, n):
            b = (i, j - 1)
            t = (i, j)
            if cell_id[b] == cell_id[t]:
                continue
            xf, yf = (i + 0.5) * h, j * h
            f1, f2 = force(xf, yf)
            q = sol.qy[i, j]
            a_b = 2.0 * k22[b] / h
            a_t = 2.0 * k22[t] / h
            t_b = k22[b] * f2 + k12[b] * (f1 - dx_p[b])
            t_t = k22[t] * f2 + k12[t] * (f1 - dx_p[t])
            p_gamma = p[b] + (t_b - q) / a_b
            q_b = t_b - a_b * (p_gamma - p[b])
            q_t = t_t - a_t * (p[t] - p_gamma)
            ub = k11[b] * (f1 - dx_p[b]) + k12[b] * (f2 - (p_gamma - p[b]) / (h / 2))
            ut = k11[t] * (f1 - dx_p[t]) + k12[t] * (f2 - (p[t] - p_gamma) / (h / 2))
            out.append(InterfaceFace(index, 1, i, j, xf, yf,
                                     float(q_b - q_t), float(ub - ut)))
            index += 1

    # vertical faces between horizontally adjacent cells of different subdomains
    for j in range(n):
        for i in range(1, n):
            l = (i - 1, j)
            r = (i, j)
            if cell_id[l] == cell_id[r]:
                continue
            xf, yf = i * h, (j + 0.5) * h
            f1, f2 = force(xf, yf)
            q = sol.qx[i, j]
            a_l = 2.0 * k11[l] / h
            a_r = 2.0 * k11[r] / h
            t_l = k11[l] * f1 + k12[l] * (f2 - dy_p[l])
            t_r = k11[r] * f1 + k12[r] * (f2 - dy_p[r])
            p_gamma = p[l] + (t_l - q) / a_l
            q_l = t_l - a_l * (p_gamma - p[l])
            q_r = t_r - a_r * (p[r] - p_gamma)
            vl = k12[l] * (f1 - (p_gamma - p[l]) / (h / 2)) + k22[l] * (f2 - dy_p[l])
            vr = k12[r] * (f1 - (p[r] - p_gamma) / (h / 2)) + k22[r] * (f2 - dy_p[r])
            out.append(InterfaceFace(index, 0, i, j, xf, yf,
                                     float(q_l - q_r), float(vl - vr)))
            index += 1
    return out


def effective_velocity(sol: DarcySolution):
    """Per-subdomain effective velocities plus the interface trace report."""
    fields = {ell: sol.u0_subdomain(ell) for ell in range(sol.problem.layout.count)}
    return fields, sol.interface_faces


def write_flux_report(faces: list[InterfaceFace], path) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("face_index,x,y,normal_jump,tangential_jump\n")
        for f in faces:
            fh.write(f"{f.index},{f.x:.17g},{f.y:.17g},{f.normal_jump:.17g},{f.tangential_jump:.17g}\n")
