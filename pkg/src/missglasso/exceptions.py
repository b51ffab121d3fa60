"""Exception types shared across the package."""


class NotPositiveDefinite(ValueError):
    """A matrix expected to be symmetric positive definite is not."""


class NotConverged(RuntimeError):
    """An iterative solver hit its iteration cap.

    The best iterate found so far is attached as ``result`` so callers can
    decide whether to proceed with it.
    """

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class DegenerateData(ValueError):
    """The data cannot support the requested estimate."""


class AllMissingColumn(DegenerateData):
    """A column has no observed entries."""


class FoldDegenerate(DegenerateData):
    """A cross-validation training fold lost all observations of a column."""


class ZeroDiagonal(ValueError):
    """A Gram matrix has a nonpositive diagonal entry."""


class ZeroResponse(ValueError):
    """The response vector has zero sum of squares."""


class CsvFormatError(ValueError):
    """A CSV file could not be parsed; carries the offending line number."""

    def __init__(self, message, line=None):
        super().__init__(message)
        self.line = line
