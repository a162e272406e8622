"""Exception types raised across the package.

Everything derives from :class:`ValuationError` so callers (and the CLI) can
separate input/validation problems from genuine bugs.
"""


class ValuationError(ValueError):
    pass


class MissingIdError(ValuationError):
    pass


class EmptyClassError(ValuationError):
    pass


class UnknownIdError(ValuationError):
    pass


class EmptySetError(ValuationError):
    pass


class SizeMismatchError(ValuationError):
    pass


class DimensionMismatchError(ValuationError):
    pass


class EmptyTestSetError(ValuationError):
    pass


class TooLargeError(ValuationError):
    pass


class NotIcuwsError(ValuationError):
    pass


class DifferentClassesError(ValuationError):
    pass


class ZeroBudgetError(ValuationError):
    pass


class InsufficientHistoryError(ValuationError):
    pass


class IndexOutOfRangeError(ValuationError, IndexError):
    pass


class InvalidSpecError(ValuationError):
    pass


class EmptyAfterRemovalError(ValuationError):
    pass


class InvalidClassOrderError(ValuationError):
    pass


class PartitionMismatchError(ValuationError):
    pass


class ParseError(ValuationError):
    def __init__(self, message, line=None, column=None):
        where = ""
        if line is not None:
            where = f" (line {line}" + (f", column {column})" if column is not None else ")")
        super().__init__(message + where)
        self.line = line
        self.column = column


class InconsistentDimensionError(ParseError):
    pass


class DuplicateIdError(ParseError):
    pass
