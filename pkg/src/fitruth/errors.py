"""Exception hierarchy shared across the package."""

from __future__ import annotations


class FitruthError(Exception):
    """Base class for every error raised by this package."""


class ParseError(FitruthError, ValueError):
    """Malformed tabular input. Carries the offending row/column when known."""

    def __init__(self, message: str, row: int | None = None, column: str | None = None):
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column!r}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)
        self.row = row
        self.column = column


class SchemaError(FitruthError, ValueError):
    pass


class ContractError(FitruthError, ValueError):
    """A precondition of an operation was violated (arity, empty input, ...)."""


class UnsupportedError(FitruthError, TypeError):
    pass


class ModelLoadError(FitruthError, ValueError):
    pass


class NumericalError(FitruthError, ArithmeticError):
    pass
