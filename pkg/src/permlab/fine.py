"""Fine-scale Stokes problem on the perforated domain.

Solves  -eps^2 lap(u) + grad(p) = f,  div(u) = 0  with no-slip values on the
outer walls and all obstacle faces.  The eps^2 viscosity is kept explicit,
so residual tolerances apply to the scaled momentum equation.  Every solve
logs its energy and Poincare monitors:

    energy   = (|u| + eps |grad u| + |p|) / |f|
    poincare = |u| / (eps |grad u|)

The pressure extension copies fluid values and fills each obstacle with the
fluid average of the pressure over its own lattice cell.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import saddle
from .errors import MaxIterExceeded
from .geometry import PerforatedMesh
from .grid import (
    CellField,
    StaggeredField,
    norm_l2_cell,
    norm_l2_gradient,
    norm_l2_staggered,
)


@dataclass
class FineSolution:
    mesh: PerforatedMesh
    u: StaggeredField            # zero on solid and boundary faces
    p: CellField                 # zero-mean over the fluid, zero in the solid
    P_ext: CellField             # extension of p to the whole domain
    momentum_residual: float
    div_residual: float
    iterations: int
    energy_monitor: float
    poincare_monitor: float
    grad_norm: float
    vel_norm: float
    pressure_norm: float


def sample_force(mesh: PerforatedMesh, force) -> StaggeredField:
    """Evaluate a closed-form force (x, y) -> (f1, f2) at all face centers."""
    g = mesh.grid
    xu, yu = g.u_face_centers()
    xv, yv = g.v_face_centers()
    fu = np.broadcast_to(force(xu, yu)[0], g.u_shape).astype(float)
    fv = np.broadcast_to(force(xv, yv)[1], g.v_shape).astype(float)
    return StaggeredField(g, fu, fv)


def solve_fine(mesh: PerforatedMesh, force, tol: float = saddle.DEFAULT_TOL,
               max_iter: int = saddle.DEFAULT_MAX_ITER) -> FineSolution:
    grid = mesh.grid
    eps = mesh.eps
    f = sample_force(mesh, force)
    problem = saddle.SaddleProblem(grid, eps * eps, f, None, mesh.solid)
    sol = saddle.solve(problem, tol=tol, max_iter=max_iter)
    if not sol.converged:
        raise MaxIterExceeded("fine problem did not converge", sol)

    fluid = ~mesh.solid
    vel_norm = norm_l2_staggered(sol.u)
    grad_norm = norm_l2_gradient(sol.u)
    p_norm = norm_l2_cell(sol.p, fluid)
    f_norm = norm_l2_staggered(f)
    energy = (vel_norm + eps * grad_norm + p_norm) / f_norm if f_norm > 0 else 0.0
    poincare = vel_norm / (eps * grad_norm) if grad_norm > 0 else 0.0

    p_ext = extend_pressure(sol.p, mesh)
    return FineSolution(
        mesh=mesh,
        u=sol.u,
        p=sol.p,
        P_ext=p_ext,
        momentum_residual=sol.momentum_residual,
        div_residual=sol.div_residual,
        iterations=sol.iterations,
        energy_monitor=energy,
        poincare_monitor=poincare,
        grad_norm=grad_norm,
        vel_norm=vel_norm,
        pressure_norm=p_norm,
    )


def extend_pressure(p: CellField, mesh: PerforatedMesh) -> CellField:
    """Copy fluid values; fill the solid cells of each perforated lattice cell
    with the fluid mean of the pressure over that lattice cell."""
    m = mesh.n_per_cell
    data = p.data.copy()
    for ell, cells in enumerate(mesh.perforated):
        mask = mesh.cell_masks[mesh.layout.micro_id(ell)]
        fluid_local = ~mask
        count = fluid_local.sum()
        for (z1, z2) in cells:
            block = data[z1 * m:(z1 + 1) * m, z2 * m:(z2 + 1) * m]
            mean = block[fluid_local].sum() / count
            block[mask] = mean
    return CellField(p.grid, data)
