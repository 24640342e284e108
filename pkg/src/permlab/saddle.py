"""Stokes saddle-point solver on masked MAC grids.

Solves  -nu*lap(u) + grad(p) = f,  div(u) = g  with no-slip values on walls
and obstacle faces, periodic wraparound otherwise.  The pressure unknowns
live on fluid cells; the velocity unknowns on active (non-frozen) faces.

The solver eliminates the velocity: the component Laplacians are factorized
once (sparse LU; FFT diagonalization when a component has no anchor), and
MINRES runs on the pressure Schur complement, whose residual at each outer
iterate equals the divergence defect of the recovered velocity.  That makes
the divergence residual non-increasing across outer iterations.  The
contract is residual-based: momentum residual below tol*|f| and divergence
residual below tol in L2.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import LinearOperator, minres, splu

from .errors import IncompatibleDivergence, NoAnchor
from .grid import (
    PERIODIC,
    CellField,
    MacGrid,
    StaggeredField,
    _interior_reflection_count,
    frozen_faces,
)

DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 10_000


@dataclass
class SaddleProblem:
    grid: MacGrid
    nu: float
    f: StaggeredField
    g: CellField | None = None
    solid: np.ndarray | None = None

    def solid_mask(self) -> np.ndarray:
        if self.solid is None:
            return np.zeros(self.grid.p_shape, dtype=bool)
        return self.solid


@dataclass
class SaddleSolution:
    u: StaggeredField
    p: CellField
    momentum_residual: float
    div_residual: float
    iterations: int
    converged: bool
    div_history: list[float] = field(default_factory=list)


def _component_matrix(grid: MacGrid, solid: np.ndarray, frozen: np.ndarray,
                      axis_normal: int, nu: float) -> tuple[sparse.csc_matrix, np.ndarray]:
    """nu*(-lap) restricted to active faces of one component, plus the
    active-face index lookup (-1 for frozen)."""
    shape = frozen.shape
    active = ~frozen
    idx = np.full(shape, -1, dtype=np.int64)
    idx[active] = np.arange(int(active.sum()))
    n_act = int(active.sum())

    axis_tan = 1 - axis_normal
    refl = _interior_reflection_count(grid, solid, axis_normal)
    if grid.bc[axis_tan] != PERIODIC:
        first = [slice(None), slice(None)]
        last = [slice(None), slice(None)]
        first[axis_tan] = 0
        last[axis_tan] = -1
        refl = refl.copy()
        refl[tuple(first)] += 1.0
        refl[tuple(last)] += 1.0

    scale = nu / grid.h ** 2
    ii, jj = np.nonzero(active)
    rows = [idx[ii, jj]]
    cols = [idx[ii, jj]]
    vals = [(4.0 + refl[ii, jj]) * scale]

    for d0, d1 in ((1, 0), (-1, 0), (0, 1), (0, -1)):
        ni = ii + d0
        nj = jj + d1
        keep = np.ones(ni.shape, dtype=bool)
        if d0 != 0:
            if grid.bc[0] == PERIODIC:
                ni = ni % shape[0]
            else:
                keep &= (ni >= 0) & (ni < shape[0])
        if d1 != 0:
            if grid.bc[1] == PERIODIC:
                nj = nj % shape[1]
            else:
                keep &= (nj >= 0) & (nj < shape[1])
        ni = np.where(keep, ni, 0)
        nj = np.where(keep, nj, 0)
        nbr = idx[ni, nj]
        keep &= nbr >= 0
        rows.append(idx[ii, jj][keep])
        cols.append(nbr[keep])
        vals.append(np.full(int(keep.sum()), -scale))

    mat = sparse.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n_act, n_act),
    )
    return mat.tocsc(), idx


def _gradient_matrix(grid: MacGrid, idx_u: np.ndarray, idx_v: np.ndarray,
                     idx_p: np.ndarray, n_u: int) -> sparse.csr_matrix:
    """G mapping fluid-cell pressures to active faces; D = -G^T exactly."""
    h = grid.h
    rows, cols, vals = [], [], []

    # vertical faces: grad_x p = (p[i, j] - p[i-1, j]) / h at face (i, j)
    ii, jj = np.nonzero(idx_u >= 0)
    fid = idx_u[ii, jj]
    if grid.bc[0] == PERIODIC:
        hi = idx_p[ii, jj]
        lo = idx_p[(ii - 1) % grid.n1, jj]
    else:
        hi = idx_p[ii, jj]          # active faces are interior: 1 <= i <= n1-1
        lo = idx_p[ii - 1, jj]
    rows += [fid, fid]
    cols += [hi, lo]
    vals += [np.full(fid.size, 1.0 / h), np.full(fid.size, -1.0 / h)]

    # horizontal faces: grad_y p = (p[i, j] - p[i, j-1]) / h at face (i, j)
    ii, jj = np.nonzero(idx_v >= 0)
    fid = idx_v[ii, jj] + n_u
    if grid.bc[1] == PERIODIC:
        hi = idx_p[ii, jj]
        lo = idx_p[ii, (jj - 1) % grid.n2]
    else:
        hi = idx_p[ii, jj]
        lo = idx_p[ii, jj - 1]
    rows += [fid, fid]
    cols += [hi, lo]
    vals += [np.full(fid.size, 1.0 / h), np.full(fid.size, -1.0 / h)]

    n_p = int(idx_p.max()) + 1
    n_faces = n_u + int((idx_v >= 0).sum())
    g_mat = sparse.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n_faces, n_p),
    )
    return g_mat.tocsr()


class _FFTInverse:
    """Pseudo-inverse of nu*(-lap) for a fully periodic unmasked component."""

    def __init__(self, shape: tuple[int, int], h: float, nu: float):
        k1 = np.arange(shape[0])
        k2 = np.arange(shape[1])
        s1 = np.sin(np.pi * k1 / shape[0]) ** 2
        s2 = np.sin(np.pi * k2 / shape[1]) ** 2
        denom = nu * 4.0 / h ** 2 * (s1[:, None] + s2[None, :])
        denom[0, 0] = 1.0
        self._denom = denom
        self._shape = shape

    def solve(self, rhs_flat: np.ndarray) -> np.ndarray:
        rhs = rhs_flat.reshape(self._shape)
        spec = np.fft.fftn(rhs)
        spec[0, 0] = 0.0
        spec /= self._denom
        return np.real(np.fft.ifftn(spec)).ravel()


def solve(problem: SaddleProblem, tol: float = DEFAULT_TOL,
          max_iter: int = DEFAULT_MAX_ITER, record_history: bool = False) -> SaddleSolution:
    """Solve the saddle system to the requested residuals.

    Returns the best iterate with ``converged=False`` when the outer
    iteration cap is hit; raises NoAnchor / IncompatibleDivergence on
    unsolvable input."""
    grid = problem.grid
    solid = problem.solid_mask()
    fluid = ~solid
    h = grid.h
    fu, fv = frozen_faces(grid, solid)
    active_u = ~fu
    active_v = ~fv

    f_u = np.where(active_u, problem.f.u, 0.0)
    f_v = np.where(active_v, problem.f.v, 0.0)
    f_norm = float(np.sqrt(h * h * (np.sum(f_u ** 2) + np.sum(f_v ** 2))))

    g_data = np.zeros(grid.p_shape) if problem.g is None else np.where(fluid, problem.g.data, 0.0)
    g_int = float(h * h * g_data.sum())
    if abs(g_int) > 1e-10:
        raise IncompatibleDivergence(
            f"prescribed divergence integrates to {g_int:.3e} over the fluid")

    unanchored = grid.bc == (PERIODIC, PERIODIC) and not solid.any()
    if unanchored:
        fmax = max(np.abs(f_u).max(initial=0.0), np.abs(f_v).max(initial=0.0))
        thresh = 1e-10 * max(1.0, fmax)
        if abs(f_u.mean()) > thresh or abs(f_v.mean()) > thresh:
            raise NoAnchor(
                "no Dirichlet surface and the force has a nonzero mean component")

    # velocity index maps and component inverses
    if unanchored:
        idx_u = np.arange(active_u.size, dtype=np.int64).reshape(grid.u_shape)
        idx_v = np.arange(active_v.size, dtype=np.int64).reshape(grid.v_shape)
        solve_u = _FFTInverse(grid.u_shape, h, problem.nu).solve
        solve_v = _FFTInverse(grid.v_shape, h, problem.nu).solve
        mat_u = mat_v = None
    else:
        mat_u, idx_u = _component_matrix(grid, solid, fu, 0, problem.nu)
        mat_v, idx_v = _component_matrix(grid, solid, fv, 1, problem.nu)
        solve_u = splu(mat_u).solve
        solve_v = splu(mat_v).solve
    n_u = int((idx_u >= 0).sum())
    n_v = int((idx_v >= 0).sum())

    idx_p = np.full(grid.p_shape, -1, dtype=np.int64)
    idx_p[fluid] = np.arange(int(fluid.sum()))

    g_mat = _gradient_matrix(grid, idx_u, idx_v, idx_p, n_u)
    d_mat = (-g_mat.T).tocsr()

    def a_inv(w: np.ndarray) -> np.ndarray:
        return np.concatenate([solve_u(w[:n_u]), solve_v(w[n_u:])])

    f_flat = np.concatenate([f_u[idx_u >= 0], f_v[idx_v >= 0]])
    g_flat = g_data[fluid]

    a_inv_f = a_inv(f_flat)
    rhs0 = d_mat @ a_inv_f - g_flat

    def schur(p_vec: np.ndarray) -> np.ndarray:
        return -(d_mat @ a_inv(g_mat @ p_vec))

    n_p = g_flat.size
    target_plain = tol / h  # L2 residual tol in the plain 2-norm
    history: list[float] = []
    iterations = 0
    if np.linalg.norm(rhs0) <= target_plain:
        p_flat = np.zeros(n_p)
        info = 0
    else:
        op = LinearOperator((n_p, n_p), matvec=schur, dtype=float)
        rhs = -rhs0
        rhs_norm = np.linalg.norm(rhs)

        counter = {"n": 0}

        def callback(xk):
            counter["n"] += 1
            if record_history:
                history.append(h * float(np.linalg.norm(rhs - schur(xk))))

        # minres stops on an internal residual estimate; aim an order low and
        # tighten until the true residual meets the absolute target
        rtol = min(max(0.1 * target_plain / rhs_norm, 1e-15), 0.1)
        p_flat = np.zeros(n_p)
        info = 0
        while True:
            p_flat, info = minres(op, rhs, x0=p_flat, rtol=rtol,
                                  maxiter=max(max_iter - counter["n"], 1),
                                  callback=callback)
            true_res = np.linalg.norm(rhs - schur(p_flat))
            if (true_res <= target_plain or info != 0 or rtol <= 1e-15
                    or counter["n"] >= max_iter):
                break
            rtol = max(rtol * 1e-2, 1e-15)
        iterations = counter["n"]
        if counter["n"] >= max_iter:
            info = max(info, 1)

    p_flat = p_flat - p_flat.mean()
    u_flat = a_inv(f_flat - g_mat @ p_flat)

    mom = float(h * np.linalg.norm(
        _momentum_residual(u_flat, p_flat, f_flat, mat_u, mat_v, g_mat, n_u, grid, problem.nu)))
    div_r = float(h * np.linalg.norm(d_mat @ u_flat - g_flat))

    u_arr = np.zeros(grid.u_shape)
    v_arr = np.zeros(grid.v_shape)
    u_arr[idx_u >= 0] = u_flat[:n_u]
    v_arr[idx_v >= 0] = u_flat[n_u:]
    p_arr = np.zeros(grid.p_shape)
    p_arr[fluid] = p_flat

    mom_ok = mom <= max(tol * f_norm, 1e-12)
    converged = info == 0 and div_r <= tol * 1.0000001 and mom_ok
    return SaddleSolution(
        u=StaggeredField(grid, u_arr, v_arr),
        p=CellField(grid, p_arr),
        momentum_residual=mom,
        div_residual=div_r,
        iterations=iterations,
        converged=converged,
        div_history=history,
    )


def _momentum_residual(u_flat, p_flat, f_flat, mat_u, mat_v, g_mat, n_u, grid, nu):
    gp = g_mat @ p_flat
    if mat_u is not None:
        au = mat_u @ u_flat[:n_u]
        av = mat_v @ u_flat[n_u:]
    else:
        au = _apply_fft_forward(u_flat[:n_u], grid, nu, 0)
        av = _apply_fft_forward(u_flat[n_u:], grid, nu, 1)
    return np.concatenate([au, av]) + gp - f_flat


def _apply_fft_forward(flat: np.ndarray, grid: MacGrid, nu: float, axis_normal: int) -> np.ndarray:
    """nu*(-lap) on a fully periodic unmasked component, for residual checks."""
    shape = grid.u_shape if axis_normal == 0 else grid.v_shape
    a = flat.reshape(shape)
    h2 = grid.h ** 2
    out = 4.0 * a
    for ax in (0, 1):
        out -= np.roll(a, 1, axis=ax) + np.roll(a, -1, axis=ax)
    return (nu / h2 * out).ravel()
