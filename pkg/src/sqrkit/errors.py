"""Exception hierarchy shared by all sqrkit modules."""


class SqrError(Exception):
    """Base class for every error raised by sqrkit."""


class InvalidGrid(SqrError, ValueError):
    pass


class InvalidKnotCount(SqrError, ValueError):
    pass


class OutOfSpan(SqrError, ValueError):
    pass


class ShapeError(SqrError, ValueError):
    pass


class InvalidProblem(SqrError, ValueError):
    pass


class DomainError(SqrError, ValueError):
    pass


class ConfigError(SqrError, ValueError):
    pass


class IngestError(SqrError, ValueError):
    """Malformed or non-numeric input data; carries the offending location."""

    def __init__(self, message, row=None, column=None):
        loc = []
        if row is not None:
            loc.append(f"row {row}")
        if column is not None:
            loc.append(f"column {column!r}")
        if loc:
            message = f"{message} ({', '.join(loc)})"
        super().__init__(message)
        self.row = row
        self.column = column


class SolverError(SqrError, RuntimeError):
    """Base class for numerical failures inside a solver."""


class NotConverged(SolverError):
    pass


class MaxIterExceeded(SolverError):
    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class SingularNormalEquations(SolverError):
    pass


class LineSearchFailed(SolverError):
    pass


class DegeneratePenalty(SolverError):
    pass


class SelectionFailed(SolverError):
    pass


class SpectrumFailed(SolverError):
    pass
