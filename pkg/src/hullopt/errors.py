"""Exception hierarchy shared by all modules."""


class HullOptError(Exception):
    """Base class for domain-level failures (mapped to exit code 1 by the CLI)."""


class ConfigError(HullOptError, ValueError):
    """Invalid model, penalty or pipeline configuration."""


class DomainError(HullOptError, ValueError):
    """A value lies outside its admissible domain."""


class DataError(HullOptError, ValueError):
    """Inconsistent arrays or database contents."""


class FitError(HullOptError, RuntimeError):
    """A regressor could not be fitted."""


class SearchExhausted(HullOptError):
    """No admissible unvisited candidate remains in the search space."""
