"""Exception types raised by curvesurvey."""


class CurveSurveyError(Exception):
    """Base class for all package errors."""


class CsvParseError(CurveSurveyError, ValueError):
    """Malformed population CSV. ``line`` is 1-based."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DegenerateStratumError(CurveSurveyError, ValueError):
    """A stratum is too small for the requested computation (N_h < 2)."""


class VarianceNotEstimableError(CurveSurveyError, ValueError):
    """Some pair of units has zero joint inclusion probability (n_h < 2)."""


class EnumerationTooLargeError(CurveSurveyError, ValueError):
    """Exhaustive sample enumeration refused; ``count`` holds the sample count."""

    def __init__(self, count, limit):
        self.count = count
        self.limit = limit
        super().__init__(
            f"design has {count} possible samples, above the enumeration limit {limit}"
        )
