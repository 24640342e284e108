#!/usr/bin/env python3
"""Recompute the golden permeability number for the default microstructure.

Solves the cell problem for the centered axis-aligned square of side 0.5 at
n = 32, 64, 128, measures the observed convergence order from the difference
ratio and Richardson-extrapolates.  The printed `golden` value is the one
committed in tests/golden_values.py; rerun this script to regenerate it.
"""

import math

from permlab.cell import solve_cell_problem
from permlab.geometry import AxisSquare, rasterize_cell

GRIDS = (32, 64, 128)


def main():
    obstacle = AxisSquare((0.5, 0.5), 0.5)
    values = {}
    for n in GRIDS:
        sol = solve_cell_problem(rasterize_cell(obstacle, n), tol=1e-10)
        values[n] = sol.K.matrix[0, 0]
        print(f"n={n:4d}  K11={values[n]:.12f}")

    d1 = values[64] - values[32]
    d2 = values[128] - values[64]
    rate = math.log2(d1 / d2)
    extrapolated = values[128] + d2 / (d1 / d2 - 1.0)
    print(f"|K(32)-K(64)|  = {abs(d1):.6e}")
    print(f"|K(64)-K(128)| = {abs(d2):.6e}")
    print(f"observed order p = {rate:.4f}")
    print(f"golden (Richardson) = {extrapolated:.6g}")


if __name__ == "__main__":
    main()
