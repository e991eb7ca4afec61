"""Exception types shared across the package."""


class IpgdnError(Exception):
    """Base class for all package errors."""


class ShapeError(IpgdnError, ValueError):
    pass


class ConfigError(IpgdnError, ValueError):
    pass


class ValidationError(IpgdnError, ValueError):
    pass


class TrainingError(IpgdnError, RuntimeError):
    pass
