"""Exception types shared across the package."""


class LidarPropError(Exception):
    """Base class; ``kind`` is the short tag used in CLI error lines."""

    kind = "error"


class FormatError(LidarPropError, ValueError):
    kind = "format"


class DataError(LidarPropError, ValueError):
    kind = "data"


class SpecError(LidarPropError, ValueError):
    kind = "spec"


class ConfigError(LidarPropError, ValueError):
    kind = "config"
