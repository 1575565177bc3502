"""Exception types shared across the package."""


class NotEnumerableError(ValueError):
    """Exhaustive enumeration requested on an environment that cannot support it."""


class EnumerationSizeError(ValueError):
    """Exact enumeration would exceed the supported outcome budget."""


class SingularSystemError(ValueError):
    """An unregularized least-squares system has no unique solution."""


class ZeroScoreNormError(ValueError):
    """An optimal-baseline denominator E[z'z] vanishes (degenerate factor)."""


class ConfigError(ValueError):
    """Invalid experiment configuration: unknown names or bad field values."""
