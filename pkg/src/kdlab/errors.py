"""Exception types raised across the lab."""


class LabError(Exception):
    """Base class for every error raised by kdlab."""


class InvalidInputError(LabError, ValueError):
    pass


class ShapeError(LabError, ValueError):
    pass


class ConfigError(LabError, ValueError):
    pass


class TargetIndexError(LabError, IndexError):
    pass


class UndefinedRatioError(LabError, ArithmeticError):
    """Both gradient norms vanish, so the RKL/FKL ratio has no value."""


class UndefinedMetricError(LabError, ValueError):
    pass


class MissingFieldError(LabError, KeyError):
    pass


class RunDivergedError(LabError, RuntimeError):
    """A toy run produced a non-finite loss.

    ``last_row`` is the last finite trajectory row and ``partial`` holds the
    trajectory recorded up to that point.
    """

    def __init__(self, message, last_row=None, partial=None):
        super().__init__(message)
        self.last_row = last_row
        self.partial = partial
