"""Exception types shared across the package."""


class PlantInputError(ValueError):
    """Raised when plant inputs are outside the function's domain."""


class ScheduleError(ValueError):
    """Raised for malformed attack schedules."""


class GenomeDecodeError(ValueError):
    """Raised when a gene value is outside the problem alphabet."""


class ConfigurationError(ValueError):
    """Raised for invalid or incomplete configuration."""


class ContractError(ValueError):
    """Raised when a caller violates an operation's precondition."""


class MetricError(ValueError):
    """Raised when a front-quality metric is undefined for its input."""


class DegenerateDataError(ValueError):
    """Raised when a statistical test receives degenerate data."""


class CalibrationError(ValueError):
    """Raised when alarm-threshold calibration cannot proceed."""


class EvaluationError(RuntimeError):
    """Raised when a fitness evaluation fails; may carry partial results."""

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial
