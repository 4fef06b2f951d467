"""Exception hierarchy shared by all qtldp modules."""


class QtldpError(Exception):
    """Base class for numerical failures raised by the library."""


class DomainError(QtldpError, ValueError):
    """An argument lies outside the region where a quantity is defined."""


class ConditioningError(QtldpError):
    """A matrix that must be inverted is numerically singular."""


class ConvergenceError(QtldpError):
    """An iterative procedure did not converge."""


class SizeError(QtldpError, ValueError):
    """A requested dense assembly exceeds the configured row cap."""


class ConfigError(Exception):
    """Malformed job configuration (CLI layer)."""
