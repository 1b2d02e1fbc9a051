"""Exception hierarchy shared across the toolkit.

Data-shaped problems (bad files, bad generator specs) derive from
DataError; training problems derive from FitError. The CLI maps these to
exit codes 2 and 3 respectively.
"""


class SessionbenchError(Exception):
    """Base class for all toolkit errors."""


class DataError(SessionbenchError):
    """Malformed or inconsistent input data."""


class ParseError(DataError):
    """A line of an input file could not be parsed."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class CategoryError(DataError):
    """An event category outside the six-token alphabet."""


class OrderingError(DataError):
    """Events handed to sessionize out of timestamp order."""


class SpecError(DataError):
    """Invalid synthetic generator configuration."""


class InputError(SessionbenchError):
    """Invalid argument to a model operation."""


class ShapeError(InputError):
    """Mutually inconsistent array shapes."""


class NumericError(SessionbenchError):
    """A non-finite value appeared where finite math was required."""


class FitError(SessionbenchError):
    """Model training cannot proceed (empty corpus, single class, ...)."""
