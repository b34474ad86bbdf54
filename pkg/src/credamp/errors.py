"""Exception hierarchy shared across the package."""


class CredampError(Exception):
    """Base class for all errors raised by credamp."""


class ConfigError(CredampError, ValueError):
    """Invalid configuration value (thresholds, bin counts, iteration counts)."""


class DataError(CredampError, ValueError):
    """Input data cannot be used (duplicate ids, malformed tables)."""


class DomainError(CredampError, ValueError):
    """A URL from which no host could be extracted."""


class AnalysisError(CredampError, RuntimeError):
    """The analysis cannot proceed on the given data (empty groups, all strata skipped)."""
