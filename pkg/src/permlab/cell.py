"""Periodic cell problems: permeability tensors and auxiliary fields.

For each microstructure the two column problems

    -lap(W_j) + grad(pi_j) = e_j,   div(W_j) = 0,   W_j = 0 on the solid

are solved on the fully periodic unit cell.  W is extended by zero into the
solid, and the permeability entry K_ij is the midpoint quadrature of the
face-averaged component i of column j, so the discrete mean of W minus K is
exactly zero.

Also provided: the divergence-corrector fields Theta_ij (prescribed-
divergence Stokes problems), and the skew potentials phi_kij built through
cell Poisson potentials h_ij with Delta h_ij = W_ij - K_ij.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import saddle
from .errors import IncompatibleDivergence, MaxIterExceeded, NoAnchor
from .grid import (
    CellField,
    MacGrid,
    StaggeredField,
    div,
    grad_energy_inner,
    norm_l2_cell,
    periodic_grid,
)


@dataclass(frozen=True)
class PermTensor:
    """2x2 permeability matrix; symmetric positive definite by contract."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.shape != (2, 2):
            raise ValueError("permeability tensor must be 2x2")
        object.__setattr__(self, "matrix", m)

    def validate(self, sym_tol: float = 1e-8) -> None:
        m = self.matrix
        if abs(m[0, 1] - m[1, 0]) > sym_tol:
            raise ValueError(f"tensor asymmetry {abs(m[0,1]-m[1,0]):.3e} exceeds {sym_tol}")
        if eigenvalues(m).min() <= 0.0:
            raise ValueError("tensor has a nonpositive eigenvalue")

    def eigenvalues(self) -> np.ndarray:
        return eigenvalues(self.matrix)


def eigenvalues(matrix: np.ndarray) -> np.ndarray:
    return np.linalg.eigvalsh(0.5 * (matrix + matrix.T))


@dataclass
class CellSolution:
    """Solution bundle of the two cell problems for one microstructure."""

    grid: MacGrid
    solid: np.ndarray
    W: tuple[StaggeredField, StaggeredField]     # columns j = 1, 2
    pi: tuple[CellField, CellField]
    K: PermTensor
    fluid_fraction: float
    iterations: int
    div_residuals: tuple[float, float]

    @property
    def n(self) -> int:
        return self.grid.n1

    def w_cell_samples(self, i: int, j: int) -> np.ndarray:
        """Component i of column j averaged to cell centers (solid gives 0)."""
        return _cell_sample(self.W[j], i)


@dataclass
class ThetaField:
    """Divergence correctors: div(Theta_ij) = -W_ij + K_ij/|Y_f| in the fluid."""

    fields: dict[tuple[int, int], StaggeredField]
    div_residuals: dict[tuple[int, int], float]
    compatibility: dict[tuple[int, int], float]


@dataclass
class SkewPotential:
    """phi_kij with d_k phi_kij = W_ij - K_ij and phi_kij = -phi_ikj."""

    fields: dict[tuple[int, int, int], CellField]
    identity_residuals: dict[tuple[int, int], float]


def _cell_sample(w: StaggeredField, comp: int) -> np.ndarray:
    if comp == 0:
        return 0.5 * (w.u + np.roll(w.u, -1, axis=0))
    return 0.5 * (w.v + np.roll(w.v, -1, axis=1))


def _unit_force(grid: MacGrid, j: int) -> StaggeredField:
    fu = np.ones(grid.u_shape) if j == 0 else np.zeros(grid.u_shape)
    fv = np.ones(grid.v_shape) if j == 1 else np.zeros(grid.v_shape)
    return StaggeredField(grid, fu, fv)


def solve_cell_problem(solid: np.ndarray, tol: float = saddle.DEFAULT_TOL,
                       max_iter: int = saddle.DEFAULT_MAX_ITER) -> CellSolution:
    """Solve both column problems on the unit cell given its solid mask."""
    n = solid.shape[0]
    if solid.shape != (n, n):
        raise ValueError("cell mask must be square")
    if not solid.any():
        raise NoAnchor("cell problem needs a nonempty obstacle")
    grid = periodic_grid(n)
    fluid = ~solid

    cols = []
    pis = []
    iters = 0
    div_res = []
    for j in range(2):
        problem = saddle.SaddleProblem(grid, 1.0, _unit_force(grid, j), None, solid)
        sol = saddle.solve(problem, tol=tol, max_iter=max_iter)
        if not sol.converged:
            raise MaxIterExceeded(f"cell problem column {j} did not converge", sol)
        cols.append(sol.u)
        pis.append(sol.p)
        iters += sol.iterations
        div_res.append(sol.div_residual)

    k_mat = np.empty((2, 2))
    for j in range(2):
        for i in range(2):
            k_mat[i, j] = _cell_sample(cols[j], i).mean()

    return CellSolution(
        grid=grid,
        solid=solid,
        W=(cols[0], cols[1]),
        pi=(pis[0], pis[1]),
        K=PermTensor(k_mat),
        fluid_fraction=float(fluid.mean()),
        iterations=iters,
        div_residuals=(div_res[0], div_res[1]),
    )


def permeability_energy_check(sol: CellSolution) -> np.ndarray:
    """|K_ij - sum_k <grad W_ik, grad W_jk>| entrywise.

    The gradient quadrature is the Dirichlet energy pairing of the discrete
    Laplacian, so agreement is limited only by the solver residuals."""
    residual = np.empty((2, 2))
    for a in range(2):
        for b in range(2):
            q = grad_energy_inner(sol.W[a], sol.W[b], sol.solid)
            residual[a, b] = abs(sol.K.matrix[a, b] - q)
    return residual


def solve_theta(sol: CellSolution, tol: float = saddle.DEFAULT_TOL,
                max_iter: int = saddle.DEFAULT_MAX_ITER) -> ThetaField:
    """Prescribed-divergence Stokes solves for the four divergence correctors."""
    grid = sol.grid
    fluid = ~sol.solid
    inv_frac = 1.0 / sol.fluid_fraction
    fields = {}
    residuals = {}
    compat = {}
    for i in range(2):
        for j in range(2):
            target = np.where(fluid, -sol.w_cell_samples(i, j) + inv_frac * sol.K.matrix[i, j], 0.0)
            drift = float(grid.h ** 2 * target.sum())
            compat[(i, j)] = drift
            if abs(drift) > 1e-10:
                raise IncompatibleDivergence(
                    f"theta target ({i},{j}) integrates to {drift:.3e}; cell solution broken")
            problem = saddle.SaddleProblem(grid, 1.0, StaggeredField.zeros(grid),
                                           CellField(grid, target), sol.solid)
            res = saddle.solve(problem, tol=tol, max_iter=max_iter)
            if not res.converged:
                raise MaxIterExceeded(f"theta problem ({i},{j}) did not converge", res)
            measured = norm_l2_cell(CellField(grid, div(res.u).data - target), fluid)
            fields[(i, j)] = res.u
            residuals[(i, j)] = measured
    return ThetaField(fields=fields, div_residuals=residuals, compatibility=compat)


def _fft_poisson_periodic(data: np.ndarray, h: float) -> np.ndarray:
    """Zero-mean solution of the 5-point Poisson equation on the periodic cell."""
    n1, n2 = data.shape
    s1 = np.sin(np.pi * np.arange(n1) / n1) ** 2
    s2 = np.sin(np.pi * np.arange(n2) / n2) ** 2
    denom = -4.0 / h ** 2 * (s1[:, None] + s2[None, :])
    denom[0, 0] = 1.0
    spec = np.fft.fftn(data)
    spec[0, 0] = 0.0
    spec /= denom
    out = np.real(np.fft.ifftn(spec))
    return out - out.mean()


def _central_diff(a: np.ndarray, axis: int, h: float) -> np.ndarray:
    return (np.roll(a, -1, axis=axis) - np.roll(a, 1, axis=axis)) / (2.0 * h)


def skew_potential(sol: CellSolution) -> SkewPotential:
    """Skew potentials from cell Poisson potentials h_ij.

    phi_kij = d_k h_ij - d_i h_kj is antisymmetric in (k, i) identically;
    the divergence identity d_k phi_kij = W_ij - K_ij holds to O(h) because
    the potentials are differentiated with wide central differences."""
    grid = sol.grid
    h = grid.h
    data = {}
    pot = {}
    for i in range(2):
        for j in range(2):
            rhs = sol.w_cell_samples(i, j) - sol.K.matrix[i, j]
            data[(i, j)] = rhs
            pot[(i, j)] = _fft_poisson_periodic(rhs, h)

    fields = {}
    for k in range(2):
        for i in range(2):
            for j in range(2):
                phi = _central_diff(pot[(i, j)], k, h) - _central_diff(pot[(k, j)], i, h)
                fields[(k, i, j)] = CellField(grid, phi)

    identity = {}
    for i in range(2):
        for j in range(2):
            acc = np.zeros(grid.p_shape)
            for k in range(2):
                acc += _central_diff(fields[(k, i, j)].data, k, h)
            identity[(i, j)] = norm_l2_cell(CellField(grid, acc - data[(i, j)]))
    return SkewPotential(fields=fields, identity_residuals=identity)
