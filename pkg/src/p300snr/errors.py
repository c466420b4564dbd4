"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class P300Error(Exception):
    exit_code = 1


class DomainError(P300Error, ValueError):
    """An argument lies outside the mathematical domain of an operation."""

    exit_code = 2


class ConfigError(P300Error, ValueError):
    """Invalid configuration: geometry, targets, flags or config files."""

    exit_code = 2


class DataError(P300Error, ValueError):
    """Malformed, inconsistent or insufficient data."""

    exit_code = 3


class NumericalError(P300Error, ArithmeticError):
    """A factorization or solve failed."""

    exit_code = 4
