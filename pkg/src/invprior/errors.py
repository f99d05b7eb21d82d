"""Exception taxonomy shared across the package.

Configuration problems are reported before any numerics run; numerical
failures during a run raise the stability/instability pair so callers can
tell a physics solver blow-up apart from a diverging reconstruction loop.
"""


class BenchError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(BenchError):
    """Invalid or inconsistent configuration."""


class UnsupportedSizeError(ConfigError):
    """Grid size outside the supported set (e.g. not a power of two)."""


class CapacityError(ConfigError):
    """Requested dense computation exceeds the feasibility bound."""


class GeometryError(ConfigError):
    """Degenerate measurement geometry (e.g. receiver on a source pixel)."""


class DataFormatError(BenchError):
    """Malformed or corrupt serialized data."""


class StabilityError(BenchError):
    """A physics simulation violated its stability condition (CFL, blow-up)."""


class InstabilityError(BenchError):
    """A reconstruction algorithm diverged (non-finite iterates)."""


class CapabilityError(BenchError):
    """Solver requires an operator capability the forward model lacks."""


class UndefinedMetricError(BenchError):
    """A metric is undefined for the given inputs (e.g. zero reference)."""


class DegenerateVisibilityError(BenchError):
    """A closure quantity touches a zero-modulus visibility."""
