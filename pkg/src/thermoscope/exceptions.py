"""Exception hierarchy. CLI exit codes are attached to each class."""


class ThermoscopeError(Exception):
    exit_code = 1


class InvalidMapError(ThermoscopeError, ValueError):
    """Map or potential specification outside the supported class."""

    exit_code = 2


class SpecError(InvalidMapError):
    exit_code = 2


class DomainError(ThermoscopeError, ValueError):
    exit_code = 2


class NumericError(ThermoscopeError, ArithmeticError):
    exit_code = 3


class ResourceError(ThermoscopeError):
    """Enumeration or grid size above the configured cap."""

    exit_code = 4


class ResolutionError(NumericError):
    exit_code = 3
