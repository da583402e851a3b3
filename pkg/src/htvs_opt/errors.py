"""Exception hierarchy shared across the package."""


class ScreeningError(Exception):
    """Base class for all domain errors raised by this package."""


class TooFewSamples(ScreeningError):
    pass


class DegenerateCovariance(ScreeningError):
    pass


class NonFiniteInput(ScreeningError):
    pass


class BadDimension(ScreeningError):
    pass


class NonFiniteThreshold(ScreeningError):
    pass


class LengthMismatch(ScreeningError):
    pass


class ZeroTail(ScreeningError):
    pass


class EmptyTable(ScreeningError):
    pass


class ColumnMissing(ScreeningError):
    pass


class NoLabels(ScreeningError):
    pass


class NotPositiveDefinite(ScreeningError):
    pass


class DuplicateColumn(ScreeningError):
    pass


class ParseError(ScreeningError):
    """Malformed input file; carries the 1-based line number."""

    def __init__(self, line: int, reason: str):
        self.line = line
        self.reason = reason
        super().__init__(f"line {line}: {reason}")


class NonFiniteScore(ParseError):
    pass
