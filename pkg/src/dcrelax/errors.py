"""
Exception hierarchy for dcrelax

Everything raised on purpose by the library is a ``DcrelaxError``. Errors that
are caused by a bad argument also subclass ``ValueError`` so that callers
treating them as plain argument errors keep working.

Solver terminations (gap reached, iteration cap, inner stall) are statuses,
not exceptions, see ``dcrelax.solver.Termination``.
"""


__all__ = [
    "DcrelaxError",
    "DimensionError",
    "ParameterError",
    "FeasibilityError",
    "ProjectionError",
    "SpectralConvergenceError",
    "HomogenizationError",
    "CertificateError",
    "OracleMismatchError",
    "OracleSizeError",
    "UnsupportedLossError",
    "SchemaVersionError",
]


class DcrelaxError(Exception):
    pass


class DimensionError(DcrelaxError, ValueError):
    pass


class ParameterError(DcrelaxError, ValueError):
    pass


class FeasibilityError(DcrelaxError, ValueError):
    pass


class ProjectionError(DcrelaxError):
    """A column vanished before projection onto the unit sphere

    Usually means the penalty weight or the curvature estimate is badly
    configured.
    """

    def __init__(self, column: int, message: str = ""):
        self.column = column
        message = message or f"Cannot normalize zero column {column}"
        super().__init__(message)


class SpectralConvergenceError(DcrelaxError):
    pass


class HomogenizationError(DcrelaxError):
    pass


class CertificateError(DcrelaxError):
    pass


class OracleSizeError(DcrelaxError, ValueError):
    pass


class OracleMismatchError(DcrelaxError):
    pass


class UnsupportedLossError(DcrelaxError):
    pass


class SchemaVersionError(DcrelaxError):
    pass
