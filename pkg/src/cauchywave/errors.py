"""Exception hierarchy shared by all modules."""


class CauchyWaveError(Exception):
    """Base class for every error raised by this package."""


class ConfigurationError(CauchyWaveError, ValueError):
    """Invalid parameters passed to a constructor or factory."""


class KernelRangeError(CauchyWaveError, ArithmeticError):
    """The kernel exponent exceeds the floating-point range.

    ``magnitude`` is the offending exponent; ``where`` optionally identifies
    the quadrature node that triggered it.
    """

    def __init__(self, message, magnitude=None, where=None):
        super().__init__(message)
        self.magnitude = magnitude
        self.where = where


class DomainError(CauchyWaveError, ValueError):
    """An evaluation point lies outside the function's domain."""


class GeometryError(CauchyWaveError, ValueError):
    """Invalid domain, target or aperture geometry."""


class ValidationError(CauchyWaveError, ValueError):
    """One or more invariants failed; ``problems`` lists every failure."""

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class DataError(CauchyWaveError, ValueError):
    """Malformed or inconsistent Cauchy data."""


class NumericalError(CauchyWaveError, RuntimeError):
    """A numerical procedure failed to converge."""
