"""Exception types shared across the package."""


class FanoCavityError(Exception):
    """Base class for all package errors."""


class DomainError(FanoCavityError, ValueError):
    """An input is outside the mathematical domain of an operation."""


class SingularityError(FanoCavityError, ArithmeticError):
    """Evaluation was requested exactly at a pole of the model."""


class InputError(FanoCavityError, ValueError):
    """A configuration or data file violates its schema.

    ``location`` points at the offending entry, e.g. ``layers[2].material``.
    """

    def __init__(self, message, location=None):
        self.location = location
        if location is not None:
            message = f"{location}: {message}"
        super().__init__(message)


class FitError(FanoCavityError, RuntimeError):
    """A fit cannot produce a meaningful result (degenerate data, collapsed width)."""


class DegenerateGeometryError(FanoCavityError, ValueError):
    """Geometry fit requested on degenerate input (coincident or collinear points)."""
