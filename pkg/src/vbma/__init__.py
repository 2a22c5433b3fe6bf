"""Vector-bundle Monge-Ampere toolkit: torus calculus, curvature positivity,
Fubini-Study checks and the Monge-Ampere vortex solver."""

from .errors import SolverError, VbmaError
from .mav import SolutionReport, VortexConfig, continuity_solve, recover_f2
from .positivity import EndoForm11, PositivityVerdict
from .torus import Density11, ScalarField, make_grid
from .vortex import VortexSolution, ma_slopes, mumford_gap

__version__ = "0.1.0"

__all__ = [
    "Density11", "EndoForm11", "PositivityVerdict", "ScalarField", "SolutionReport",
    "SolverError", "VbmaError", "VortexConfig", "VortexSolution", "continuity_solve",
    "ma_slopes", "make_grid", "mumford_gap", "recover_f2",
]
