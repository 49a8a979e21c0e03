"""Exception hierarchy shared across the package."""


class QifsimError(Exception):
    """Base class for all package errors."""


class DomainError(QifsimError, ValueError):
    """A physical or numerical input is outside its valid domain."""


class SolverError(QifsimError, RuntimeError):
    """A root search failed to bracket or converge."""


class FitError(QifsimError, RuntimeError):
    """A model fit did not describe the data within tolerance."""


class ConfigError(QifsimError):
    """A scenario or data file is missing, malformed, or inconsistent."""
