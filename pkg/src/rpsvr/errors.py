"""Exception types shared across the package."""


class RPSVRError(Exception):
    """Base class for all package errors."""


class ValidationError(RPSVRError, ValueError):
    """Invalid parameters, shapes or inputs."""


class IngestionError(ValidationError):
    """A data file could not be parsed.

    ``row`` and ``column`` are 1-based positions in the file (``None`` when
    the problem is not tied to a single cell).
    """

    def __init__(self, message, row=None, column=None):
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)
        self.row = row
        self.column = column


class ConvergenceError(RPSVRError):
    """Solver stopped at ``max_iter`` before reaching the KKT tolerance.

    The partial solution is attached so callers can inspect or reuse it.
    """

    def __init__(self, message, residual, solution=None):
        super().__init__(f"{message} (KKT violation {residual:.3e})")
        self.residual = residual
        self.solution = solution
