"""Exception hierarchy.

Errors fall into three families that the command line maps to distinct exit
codes: configuration problems, data problems and solver problems.
"""


class LinfSynthError(Exception):
    """Base class for every error raised by this package."""

    exit_code = 1

    def to_dict(self):
        return {"error": type(self).__name__, "message": str(self)}


class ConfigError(LinfSynthError, ValueError):
    exit_code = 1


class DataError(LinfSynthError, ValueError):
    exit_code = 2


class SolverError(LinfSynthError, RuntimeError):
    exit_code = 3


# --- data -------------------------------------------------------------------

class NonFinite(DataError):
    def __init__(self, row, col):
        self.row, self.col = row, col
        super().__init__(f"non-finite outcome at row {row}, column {col}")


class BadCutover(DataError):
    pass


class TooFewControls(DataError):
    pass


class DimensionMismatch(DataError):
    pass


class RankDeficient(DataError):
    pass


class LambdaMaxZero(DataError):
    pass


class ParseError(DataError):
    def __init__(self, message, line=None, column=None):
        self.line, self.column = line, column
        where = []
        if line is not None:
            where.append(f"line {line}")
        if column is not None:
            where.append(f"column {column!r}")
        suffix = f" ({', '.join(where)})" if where else ""
        super().__init__(message + suffix)


class MissingTreatedColumn(DataError):
    pass


class RaggedRows(ParseError):
    pass


# --- configuration ----------------------------------------------------------

class UnsupportedPenalty(ConfigError):
    pass


class BadK(ConfigError):
    pass


class OddJ(ConfigError):
    pass


class NonStationary(ConfigError):
    pass


# --- solver -----------------------------------------------------------------

class Infeasible(SolverError):
    pass


class DomainViolation(SolverError):
    pass


class LinearSolveFailure(SolverError):
    pass


class SolverFailure(SolverError):
    def __init__(self, message, status=None):
        self.status = status
        super().__init__(message)


class DegenerateColumnWarning(UserWarning):
    """A control column has zero variance and was left out of the lambda grid."""


class ShortPrePeriodWarning(UserWarning):
    """Fewer pre-treatment periods than controls (t0 <= J)."""
