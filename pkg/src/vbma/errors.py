"""Exception hierarchy.

Every failure the library can report is a subclass of :class:`VbmaError` and
carries a short machine-readable ``reason`` used by the CLI reports.
"""


class VbmaError(Exception):
    reason = "error"


class NonPositiveImaginaryPart(VbmaError, ValueError):
    reason = "non_positive_imaginary_part"


class BadGridSize(VbmaError, ValueError):
    reason = "bad_grid_size"


class NonZeroMean(VbmaError, ValueError):
    reason = "non_zero_mean"


class GridMismatch(VbmaError, ValueError):
    reason = "grid_mismatch"


class RankNotTwo(VbmaError, ValueError):
    reason = "rank_not_two"


class DimensionOutOfRange(VbmaError, ValueError):
    reason = "dimension_out_of_range"


class SolverError(VbmaError, RuntimeError):
    """Base class for failures of the continuity solver."""

    reason = "solver_error"


class LinearSolveFailure(SolverError):
    reason = "linear_solve_failure"


class DampingFloor(SolverError):
    reason = "damping_floor"


class NewtonStall(SolverError):
    reason = "newton_stall"


class StabilityGate(SolverError):
    reason = "stability_gate"


class StepFloorReached(SolverError):
    reason = "step_floor_reached"


class MonitorViolation(SolverError):
    reason = "monitor_violation"


class SolvabilityFailure(SolverError):
    reason = "solvability_failure"


class ConfigParseError(VbmaError, ValueError):
    reason = "config_parse_error"


class SchemaMismatch(VbmaError, ValueError):
    reason = "schema_mismatch"
