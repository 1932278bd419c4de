"""Exception hierarchy shared across the package."""


class VprError(Exception):
    """Base class for all errors raised by vpreval."""


class ValidationError(VprError, ValueError):
    """Input violates a documented invariant."""


class DatasetError(VprError):
    """Dataset on disk is structurally broken (missing folders, gaps, unreadable files)."""


class ConfigurationError(VprError, ValueError):
    """Technique or run configuration is inconsistent with its inputs."""


class MatchingError(VprError, ValueError):
    """Descriptors cannot be compared (dimension mismatch, wrong shape)."""


class MetricError(VprError, ValueError):
    """A metric is undefined for the given inputs."""
