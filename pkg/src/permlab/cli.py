"""Command line entry points: cell, darcy, fine, sweep, dump.

Exit codes: 0 success (and, for sweep, all stability monitors pass),
1 monitor failure, 2 configuration errors, 3 solver failures (partial CSV
retained for sweeps).  All outputs are deterministic for a given config.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from .cell import CellSolution, permeability_energy_check, solve_cell_problem
from .config import RunConfig, load_config
from .darcy import DarcyProblem, solve_darcy, write_flux_report
from .errors import ConfigError, MaxIterExceeded, PermlabError
from .fine import solve_fine
from .geometry import build_perforated_mesh, rasterize_cell, write_mask_pgm
from .grid import read_field, write_field
from .twoscale import (
    ConvergenceReport,
    SweepRow,
    build_two_scale,
    error_norms,
    write_report_csv,
)

EXIT_OK = 0
EXIT_MONITOR = 1
EXIT_CONFIG = 2
EXIT_SOLVER = 3


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _cell_solutions(cfg: RunConfig) -> list[CellSolution]:
    out = []
    for idx in range(cfg.micro_count()):
        solid = rasterize_cell(cfg.obstacles[idx], cfg.n_per_cell)
        out.append(solve_cell_problem(solid, tol=cfg.tol, max_iter=cfg.max_iter))
    return out


def cmd_cell(cfg: RunConfig, out_dir: str) -> int:
    for idx, sol in enumerate(_cell_solutions(cfg)):
        energy = permeability_energy_check(sol)
        k = sol.K.matrix
        with open(os.path.join(out_dir, f"K_{idx}.txt"), "w", encoding="ascii") as fh:
            fh.write(f"{_fmt(k[0,0])} {_fmt(k[0,1])}\n{_fmt(k[1,0])} {_fmt(k[1,1])}\n")
        summary = {
            "n": sol.n,
            "fluid_fraction": sol.fluid_fraction,
            "K": [[k[0, 0], k[0, 1]], [k[1, 0], k[1, 1]]],
            "energy_residual": float(energy.max()),
            "iterations": sol.iterations,
        }
        path = os.path.join(out_dir, f"cell_{idx}.json")
        with open(path, "w", encoding="ascii") as fh:
            json.dump(summary, fh, indent=2, sort_keys=True)
            fh.write("\n")
        write_mask_pgm(sol.solid, os.path.join(out_dir, f"mask_{idx}.pgm"))
        print(f"microstructure {idx}: K11={_fmt(k[0,0])} K22={_fmt(k[1,1])} "
              f"K12={_fmt(k[0,1])} iterations={sol.iterations}")
    return EXIT_OK


def cmd_darcy(cfg: RunConfig, out_dir: str) -> int:
    cells = _cell_solutions(cfg)
    n = round(1.0 / cfg.eps) * cfg.n_per_cell
    tensors = tuple(cells[cfg.layout.micro_id(ell)].K for ell in range(cfg.layout.count))
    sol = solve_darcy(DarcyProblem(cfg.layout, tensors, cfg.force(), n))
    write_field(os.path.join(out_dir, "P0.field"), sol.P0.data, sol.grid, "cell")
    write_flux_report(sol.interface_faces, os.path.join(out_dir, "flux_jumps.csv"))
    print(f"effective pressure solved on {n}x{n}; conservation residual "
          f"{_fmt(sol.conservation_residual)}; {len(sol.interface_faces)} interface faces")
    return EXIT_OK


def cmd_fine(cfg: RunConfig, out_dir: str) -> int:
    mesh = build_perforated_mesh(cfg.layout, cfg.obstacles, cfg.eps, cfg.n_per_cell)
    sol = solve_fine(mesh, cfg.force(), tol=cfg.tol, max_iter=cfg.max_iter)
    g = mesh.grid
    write_field(os.path.join(out_dir, "u.field"), sol.u.u, g, "face_u")
    write_field(os.path.join(out_dir, "v.field"), sol.u.v, g, "face_v")
    write_field(os.path.join(out_dir, "p.field"), sol.p.data, g, "cell")
    write_field(os.path.join(out_dir, "P_ext.field"), sol.P_ext.data, g, "cell")
    print(f"fine problem eps={_fmt(cfg.eps)} grid {g.n1}x{g.n2}: "
          f"energy={_fmt(sol.energy_monitor)} poincare={_fmt(sol.poincare_monitor)} "
          f"iterations={sol.iterations}")
    return EXIT_OK


def _sweep_row(cfg: RunConfig, cells: list[CellSolution], eps: float) -> SweepRow:
    force = cfg.force()
    mesh = build_perforated_mesh(cfg.layout, cfg.obstacles, eps, cfg.n_per_cell)
    tensors = tuple(cells[cfg.layout.micro_id(ell)].K for ell in range(cfg.layout.count))
    dsol = solve_darcy(DarcyProblem(cfg.layout, tensors, force, mesh.grid.n1))
    fsol = solve_fine(mesh, force, tol=cfg.tol, max_iter=cfg.max_iter)
    two = build_two_scale(cells, dsol, mesh, force)
    errs = error_norms(fsol, two, dsol, mesh)
    return SweepRow(eps, cfg.n_per_cell, errs["err_vel"], errs["err_grad"],
                    errs["err_press"], fsol.energy_monitor, fsol.poincare_monitor)


def _monitors_pass(rows: list[SweepRow]) -> bool:
    ordered = sorted(rows, key=lambda r: -r.eps)
    for prev, cur in zip(ordered, ordered[1:]):
        for a, b in ((prev.energy_const, cur.energy_const),
                     (prev.poincare_const, cur.poincare_const)):
            if a > 0 and b > 0 and (b / a > 10.0 or a / b > 10.0):
                return False
    return True


def cmd_sweep(cfg: RunConfig, out_dir: str) -> int:
    if len(cfg.eps_list) < 3:
        raise ConfigError("sweep.eps_list needs at least 3 values for rate fitting")
    cells = _cell_solutions(cfg)
    csv_path = os.path.join(out_dir, "report.csv")
    rows: list[SweepRow] = []
    try:
        if cfg.threads > 1:
            with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
                rows = list(pool.map(lambda e: _sweep_row(cfg, cells, e), cfg.eps_list))
        else:
            for eps in cfg.eps_list:
                rows.append(_sweep_row(cfg, cells, eps))
    except MaxIterExceeded as exc:
        report = ConvergenceReport(sorted(rows, key=lambda r: -r.eps),
                                   float("nan"), float("nan"), float("nan"))
        write_report_csv(report, csv_path, cfg.sha256)
        print(f"solver failure: {exc}; partial CSV at {csv_path}", file=sys.stderr)
        return EXIT_SOLVER

    report = ConvergenceReport.from_rows(rows)
    write_report_csv(report, csv_path, cfg.sha256)
    print(f"sweep of {len(rows)} periods written to {csv_path}")
    print(f"rate_vel={_fmt(report.rate_vel)} rate_grad={_fmt(report.rate_grad)} "
          f"rate_press={_fmt(report.rate_press)}")
    if not _monitors_pass(rows):
        print("stability monitors failed: >10x growth between consecutive eps",
              file=sys.stderr)
        return EXIT_MONITOR
    return EXIT_OK


def cmd_dump(path: str) -> int:
    data, h, kind = read_field(path)
    print(f"{data.shape[0]} {data.shape[1]} {_fmt(h)} {kind}")
    print(f"min={_fmt(data.min())} max={_fmt(data.max())} mean={_fmt(data.mean())}")
    for row in data:
        print(" ".join(_fmt(x) for x in row))
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="permlab",
        description="Permeability tensors, effective Darcy flow and two-scale "
                    "error studies for periodic porous media.")
    parser.add_argument("--version", action="version", version=f"permlab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, descr in (("cell", "solve the unit-cell problems and report K"),
                        ("darcy", "solve the effective pressure problem"),
                        ("fine", "solve the fine-scale perforated problem"),
                        ("sweep", "run the eps sweep and fit convergence rates")):
        p = sub.add_parser(name, help=descr)
        p.add_argument("config", help="path to the run configuration")
    p = sub.add_parser("dump", help="print a field file")
    p.add_argument("field_file", help="path to a .field dump")

    args = parser.parse_args(argv)
    try:
        if args.command == "dump":
            return cmd_dump(args.field_file)
        cfg = load_config(args.config)
        os.makedirs(cfg.out_dir, exist_ok=True)
        handler = {"cell": cmd_cell, "darcy": cmd_darcy,
                   "fine": cmd_fine, "sweep": cmd_sweep}[args.command]
        return handler(cfg, cfg.out_dir)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except MaxIterExceeded as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except PermlabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
