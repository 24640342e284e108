"""Two-scale approximation, interface jump data, error norms and rate fits.

The comparison field is V(x) = W(x/eps) (f - grad P0) built per subdomain,
with W sampled by exact lattice translation (the unit-cell grid has the same
resolution as one period of the fine grid, so no interpolation enters).  The
gradient comparison uses the same difference quotients on both sides, with
the unit-cell samples tiled periodically.

Error norms follow the scaled-velocity convention of the fine problem:

    err_vel٭  = | u_eps - W(x/eps)(f - grad P0) |            over a subdomain
    err_grad٭ = | eps grad u_eps - (grad W)(x/eps)(f-grad P0) |
    err_press = | P_eps - mean(P_eps) - P0 |                  over the domain
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .darcy import DarcySolution
from .errors import DegenerateNormal, IncommensurateGrids, InsufficientRows
from .fine import FineSolution
from .geometry import PerforatedMesh
from .grid import StaggeredField, face_weights, gradient_samples


@dataclass
class TwoScaleField:
    mesh: PerforatedMesh
    V: StaggeredField
    grad_comparison: dict[str, np.ndarray]  # tiled (grad W)(x/eps) (f - grad P0)
    face_subdomain_u: np.ndarray
    face_subdomain_v: np.ndarray
    sample_subdomain: dict[str, np.ndarray]


@dataclass
class SweepRow:
    eps: float
    n_per_cell: int
    err_vel: tuple[float, float]
    err_grad: tuple[float, float]
    err_press: float
    energy_const: float
    poincare_const: float


@dataclass
class ConvergenceReport:
    rows: list[SweepRow]
    rate_vel: float
    rate_grad: float
    rate_press: float

    @classmethod
    def from_rows(cls, rows: list[SweepRow]) -> "ConvergenceReport":
        rows = sorted(rows, key=lambda r: -r.eps)
        eps = [r.eps for r in rows]
        vel = [sum(r.err_vel) for r in rows]
        grd = [sum(r.err_grad) for r in rows]
        prs = [r.err_press for r in rows]
        return cls(rows, fit_rate(eps, vel), fit_rate(eps, grd), fit_rate(eps, prs))


# ---------------------------------------------------------------------------
# two-scale field construction


def _matched_average(donors, sample_sub):
    """Average donor-cell values whose subdomain matches the sample's."""
    acc = np.zeros(sample_sub.shape)
    cnt = np.zeros(sample_sub.shape)
    for val, sub, valid in donors:
        sel = valid & (sub == sample_sub)
        acc += np.where(sel, val, 0.0)
        cnt += sel
    return acc / np.maximum(cnt, 1)


def _face_g(mesh: PerforatedMesh, darcy: DarcySolution, force):
    """(f - grad P0) at u- and v-face centers, subdomain-correct traces."""
    g = mesh.grid
    n = g.n1
    sub = mesh.cell_subdomain
    gx, gy = darcy.grad_x, darcy.grad_y

    xu, yu = g.u_face_centers()
    face_sub_u = mesh.layout.subdomain_of_points(xu, yu)
    iu = np.arange(n + 1)
    left = np.clip(iu - 1, 0, n - 1)
    right = np.clip(iu, 0, n - 1)
    valid_l = (iu - 1 >= 0)[:, None] & np.ones((1, n), dtype=bool)
    valid_r = (iu <= n - 1)[:, None] & np.ones((1, n), dtype=bool)
    donors_u = lambda arr: [
        (arr[left, :], sub[left, :], valid_l),
        (arr[right, :], sub[right, :], valid_r),
    ]
    f1u, f2u = force(xu, yu)
    g1_u = np.broadcast_to(f1u, g.u_shape) - _matched_average(donors_u(gx), face_sub_u)
    g2_u = np.broadcast_to(f2u, g.u_shape) - _matched_average(donors_u(gy), face_sub_u)

    xv, yv = g.v_face_centers()
    face_sub_v = mesh.layout.subdomain_of_points(xv, yv)
    jv = np.arange(n + 1)
    below = np.clip(jv - 1, 0, n - 1)
    above = np.clip(jv, 0, n - 1)
    valid_b = np.ones((n, 1), dtype=bool) & (jv - 1 >= 0)[None, :]
    valid_a = np.ones((n, 1), dtype=bool) & (jv <= n - 1)[None, :]
    donors_v = lambda arr: [
        (arr[:, below], sub[:, below], valid_b),
        (arr[:, above], sub[:, above], valid_a),
    ]
    f1v, f2v = force(xv, yv)
    g1_v = np.broadcast_to(f1v, g.v_shape) - _matched_average(donors_v(gx), face_sub_v)
    g2_v = np.broadcast_to(f2v, g.v_shape) - _matched_average(donors_v(gy), face_sub_v)

    return (g1_u, g2_u, face_sub_u), (g1_v, g2_v, face_sub_v)


def _tile(cell_array: np.ndarray, row_idx: np.ndarray, col_idx: np.ndarray) -> np.ndarray:
    return cell_array[np.ix_(row_idx, col_idx)]


def build_two_scale(cell_solutions, darcy: DarcySolution, mesh: PerforatedMesh,
                    force) -> TwoScaleField:
    """Assemble V = W(x/eps) (f - grad P0) and its gradient comparison field."""
    g = mesh.grid
    n = g.n1
    m = mesh.n_per_cell
    for sol in cell_solutions:
        if sol.n != m:
            raise IncommensurateGrids(
                f"cell grid n={sol.n} does not match n_per_cell={m}")
    if darcy.grid.n1 != n:
        raise IncommensurateGrids(
            f"effective grid n={darcy.grid.n1} does not match the fine grid n={n}")

    (g1_u, g2_u, fsub_u), (g1_v, g2_v, fsub_v) = _face_g(mesh, darcy, force)

    iu = np.arange(n + 1) % m
    ju = np.arange(n) % m
    iv = np.arange(n) % m
    jv = np.arange(n + 1) % m

    v_u = np.zeros(g.u_shape)
    v_v = np.zeros(g.v_shape)
    for ell in range(mesh.layout.count):
        sol = cell_solutions[mesh.layout.micro_id(ell)]
        w11 = _tile(sol.W[0].u, iu, ju)
        w12 = _tile(sol.W[1].u, iu, ju)
        w21 = _tile(sol.W[0].v, iv, jv)
        w22 = _tile(sol.W[1].v, iv, jv)
        sel_u = fsub_u == ell
        sel_v = fsub_v == ell
        v_u = np.where(sel_u, w11 * g1_u + w12 * g2_u, v_u)
        v_v = np.where(sel_v, w21 * g1_v + w22 * g2_v, v_v)

    grad_cmp, sample_sub = _grad_comparison(cell_solutions, darcy, mesh, force)

    return TwoScaleField(
        mesh=mesh,
        V=StaggeredField(g, v_u, v_v),
        grad_comparison=grad_cmp,
        face_subdomain_u=fsub_u,
        face_subdomain_v=fsub_v,
        sample_subdomain=sample_sub,
    )


def _corner_g(mesh, darcy, force, xs, ys, i_lo, j_lo):
    """(f - grad P0) at corner-type sample positions; donors are the up-to-4
    surrounding cells restricted to the sample's subdomain side."""
    n = mesh.grid.n1
    sub = mesh.cell_subdomain
    sample_sub = mesh.layout.subdomain_of_points(xs, ys)
    donors = []
    for di in (0, 1):
        for dj in (0, 1):
            ci = i_lo + di
            cj = j_lo + dj
            valid = (ci >= 0) & (ci <= n - 1) & (cj >= 0) & (cj <= n - 1)
            cic = np.clip(ci, 0, n - 1)
            cjc = np.clip(cj, 0, n - 1)
            donors.append((cic, cjc, valid))
    f1, f2 = force(xs, ys)
    gx = _matched_average([(darcy.grad_x[ci, cj], sub[ci, cj], val)
                                 for ci, cj, val in donors], sample_sub)
    gy = _matched_average([(darcy.grad_y[ci, cj], sub[ci, cj], val)
                                 for ci, cj, val in donors], sample_sub)
    return (np.broadcast_to(f1, xs.shape) - gx,
            np.broadcast_to(f2, xs.shape) - gy, sample_sub)


def _grad_comparison(cell_solutions, darcy, mesh, force):
    """(grad W)(x/eps) (f - grad P0) tiled onto the fine gradient sample sets."""
    g = mesh.grid
    n = g.n1
    m = mesh.n_per_cell
    h = g.h
    xc, yc = g.cell_centers()
    sub_c = mesh.cell_subdomain
    f1c, f2c = force(xc, yc)
    g1_c = np.broadcast_to(f1c, (n, n)) - darcy.grad_x
    g2_c = np.broadcast_to(f2c, (n, n)) - darcy.grad_y

    cell_grads = [gradient_samples(sol.W[0]) for sol in cell_solutions], \
                 [gradient_samples(sol.W[1]) for sol in cell_solutions]

    # sample index maps into the periodic cell arrays
    ic = np.arange(n) % m
    idx = {
        "dudx": (ic, ic),
        "dvdy": (ic, ic),
        # corner samples: x rows I=0..n for dudy live at x=I*h; interior y rows
        "dudy": (np.arange(n + 1) % m, (np.arange(n - 1) + 1) % m),
        "dvdx": ((np.arange(n - 1) + 1) % m, np.arange(n + 1) % m),
    }

    # corner sample positions and their (f - grad P0)
    x_dudy, y_dudy = np.meshgrid(np.arange(n + 1) * h, (np.arange(n - 1) + 1) * h,
                                 indexing="ij")
    g1_dudy, g2_dudy, sub_dudy = _corner_g(
        mesh, darcy, force, x_dudy, y_dudy,
        np.add.outer(np.arange(n + 1), np.zeros(n - 1, dtype=int)) - 1,
        np.add.outer(np.zeros(n + 1, dtype=int), np.arange(n - 1)))
    x_dvdx, y_dvdx = np.meshgrid((np.arange(n - 1) + 1) * h, np.arange(n + 1) * h,
                                 indexing="ij")
    g1_dvdx, g2_dvdx, sub_dvdx = _corner_g(
        mesh, darcy, force, x_dvdx, y_dvdx,
        np.add.outer(np.arange(n - 1), np.zeros(n + 1, dtype=int)),
        np.add.outer(np.zeros(n - 1, dtype=int), np.arange(n + 1)) - 1)

    gvals = {
        "dudx": (g1_c, g2_c, sub_c),
        "dvdy": (g1_c, g2_c, sub_c),
        "dudy": (g1_dudy, g2_dudy, sub_dudy),
        "dvdx": (g1_dvdx, g2_dvdx, sub_dvdx),
    }

    out = {}
    sample_sub = {}
    for key in ("dudx", "dudy", "dvdx", "dvdy"):
        ridx, cidx = idx[key]
        g1s, g2s, subs = gvals[key]
        acc = np.zeros(subs.shape)
        for ell in range(mesh.layout.count):
            mid = mesh.layout.micro_id(ell)
            w_col1 = cell_grads[0][mid][key]
            w_col2 = cell_grads[1][mid][key]
            tiled1 = _tile(w_col1, ridx, cidx)
            tiled2 = _tile(w_col2, ridx, cidx)
            acc = np.where(subs == ell, tiled1 * g1s + tiled2 * g2s, acc)
        out[key] = acc
        sample_sub[key] = subs
    return out, sample_sub


# ---------------------------------------------------------------------------
# interface jump data


def interface_jump(wm: np.ndarray, wp: np.ndarray, km: np.ndarray, kp: np.ndarray,
                   normal: np.ndarray):
    """Boundary data repairing the two-scale mismatch on an interface.

    Returns (H, M): column j of H is the jump datum for column j, and M is
    the continuity matrix  M_ij = delta_ij - n_j n_m K-_mi / <n K-, n>
    whose rows annihilate the normal: n_i M_ij = 0."""
    nvec = np.asarray(normal, dtype=float)
    denom = float(nvec @ km @ nvec)
    if denom <= 1e-14:
        raise DegenerateNormal(f"<n K-, n> = {denom:.3e}")
    coeff = np.einsum("mj,i,m->ij", km - kp, nvec, nvec) / denom  # (i, j)
    h_mat = wm - wp - wm @ coeff
    m_mat = np.eye(2) - np.einsum("j,m,mi->ij", nvec, nvec, km) / denom
    return h_mat, m_mat


# ---------------------------------------------------------------------------
# error norms and rate fitting


def error_norms(fine: FineSolution, two: TwoScaleField, darcy: DarcySolution,
                mesh: PerforatedMesh) -> dict:
    g = mesh.grid
    h2 = g.h ** 2
    wu, wv = face_weights(g)
    du = fine.u.u - two.V.u
    dv = fine.u.v - two.V.v

    count = mesh.layout.count
    err_vel = []
    for ell in range(count):
        su = two.face_subdomain_u == ell
        sv = two.face_subdomain_v == ell
        err_vel.append(float(np.sqrt(np.sum(wu * su * du ** 2) + np.sum(wv * sv * dv ** 2))))

    fine_grads = gradient_samples(fine.u)
    err_grad = []
    for ell in range(count):
        acc = 0.0
        for key, samples in fine_grads.items():
            diff = mesh.eps * samples - two.grad_comparison[key]
            sel = two.sample_subdomain[key] == ell
            acc += float(np.sum(sel * diff ** 2))
        err_grad.append(float(np.sqrt(h2 * acc)))

    p_ext = fine.P_ext.data
    diff_p = p_ext - p_ext.mean() - darcy.P0.data
    err_press = float(np.sqrt(h2 * np.sum(diff_p ** 2)))

    pad = max(0, 2 - count)
    return {
        "err_vel": tuple(err_vel + [0.0] * pad),
        "err_grad": tuple(err_grad + [0.0] * pad),
        "err_press": err_press,
    }


def fit_rate(eps_values, errors) -> float:
    """Least-squares slope of log(err) against log(eps)."""
    if len(eps_values) < 3 or len(errors) != len(eps_values):
        raise InsufficientRows("rate fit needs at least 3 rows")
    errs = np.asarray(errors, dtype=float)
    if np.any(errs <= 0.0):
        raise ValueError("rate fit needs strictly positive errors")
    slope = np.polyfit(np.log(np.asarray(eps_values, dtype=float)), np.log(errs), 1)[0]
    return float(slope)


CSV_HEADER = ("eps,n_per_cell,err_vel_1,err_vel_2,err_grad_1,err_grad_2,"
              "err_press,energy_const,poincare_const")


def write_report_csv(report: ConvergenceReport, path, config_hash: str | None = None) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        if config_hash is not None:
            fh.write(f"# config_sha256={config_hash}\n")
        fh.write(CSV_HEADER + "\n")
        for r in report.rows:
            cols = [r.eps, r.n_per_cell, r.err_vel[0], r.err_vel[1],
                    r.err_grad[0], r.err_grad[1], r.err_press,
                    r.energy_const, r.poincare_const]
            fh.write(",".join(_fmt(c) for c in cols) + "\n")
        fh.write(f"rate_vel={_fmt(report.rate_vel)}\n")
        fh.write(f"rate_grad={_fmt(report.rate_grad)}\n")
        fh.write(f"rate_press={_fmt(report.rate_press)}\n")


def _fmt(value) -> str:
    if isinstance(value, int):
        return str(value)
    return format(float(value), ".17g")
