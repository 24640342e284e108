"""Exception types shared across the toolkit."""


class PermlabError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(PermlabError):
    """Malformed or incomplete run configuration."""


class ObstacleTouchesBoundary(PermlabError):
    """Obstacle has no positive margin to the unit-cell boundary."""


class DisconnectedFluid(PermlabError):
    """Fluid part of a rasterized cell is not connected."""


class EpsTooLarge(PermlabError):
    """Some subdomain receives no perforated lattice cell at this period."""


class IncommensurateGrids(PermlabError):
    """Cell grid and global grid do not align by exact lattice translation."""


class NoAnchor(PermlabError):
    """Velocity space has no Dirichlet surface and the force has nonzero mean."""


class IncompatibleDivergence(PermlabError):
    """Prescribed divergence not compatible with the boundary net flux."""


class MaxIterExceeded(PermlabError):
    """Iterative solve stopped at the iteration cap; best iterate attached."""

    def __init__(self, message, solution=None):
        super().__init__(message)
        self.solution = solution


class IncompatibleFlux(PermlabError):
    """Prescribed boundary fluxes of a Neumann problem do not balance."""


class SingularK(PermlabError):
    """Permeability tensor input is not symmetric positive definite."""


class DegenerateNormal(PermlabError):
    """Normal direction with vanishing permeability-weighted length."""


class InsufficientRows(PermlabError):
    """Rate fit requested with fewer than three sweep rows."""
