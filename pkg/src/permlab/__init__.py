"""permlab: permeability tensors, Darcy limits and two-scale error studies
for periodically perforated porous media on MAC staggered grids."""

__version__ = "0.1.0"

from .cell import (
    CellSolution,
    PermTensor,
    SkewPotential,
    ThetaField,
    permeability_energy_check,
    skew_potential,
    solve_cell_problem,
    solve_theta,
)
from .config import RunConfig, load_config
from .darcy import DarcyProblem, DarcySolution, effective_velocity, solve_darcy
from .errors import (
    ConfigError,
    DegenerateNormal,
    DisconnectedFluid,
    EpsTooLarge,
    IncommensurateGrids,
    IncompatibleDivergence,
    IncompatibleFlux,
    InsufficientRows,
    MaxIterExceeded,
    NoAnchor,
    ObstacleTouchesBoundary,
    PermlabError,
    SingularK,
)
from .fine import FineSolution, extend_pressure, solve_fine
from .geometry import (
    AxisSquare,
    Disk,
    HalfSplit,
    Layout,
    ObstacleSpec,
    PerforatedMesh,
    Polygon,
    WholeDomain,
    build_perforated_mesh,
    rasterize_cell,
    write_mask_pgm,
)
from .grid import CellField, MacGrid, StaggeredField, div, grad, lap
from .saddle import SaddleProblem, SaddleSolution, solve
from .twoscale import (
    ConvergenceReport,
    SweepRow,
    TwoScaleField,
    build_two_scale,
    error_norms,
    fit_rate,
    interface_jump,
    write_report_csv,
)

__all__ = [name for name in dir() if not name.startswith("_")]
