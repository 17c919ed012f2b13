"""Exception hierarchy shared by the pipeline stages.

The CLI maps each class to its own exit code.
"""


class SoftFailError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(SoftFailError, ValueError):
    pass


class GeometryError(SoftFailError, ValueError):
    """Inconsistent lightpath geometry or gain lists."""


class NumericDomainError(SoftFailError, ValueError):
    pass


class CalibrationError(SoftFailError):
    """Raised when a calibration target cannot be met.

    ``diagnostics`` holds whatever the search learned before giving up.
    """

    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class DatasetError(SoftFailError, ValueError):
    pass


class TrainingDivergence(SoftFailError):
    """Training produced a non-finite loss or gradient."""

    def __init__(self, message: str, history=None):
        super().__init__(message)
        self.history = history
