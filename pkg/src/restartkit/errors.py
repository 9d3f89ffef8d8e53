"""Exception types shared across the package."""


class RestartKitError(Exception):
    pass


class UndefinedConditional(RestartKitError, ValueError):
    """Raised when a quantity conditions on an event of probability zero."""


class NoFiniteMass(RestartKitError, ValueError):
    """Raised when a distribution puts all of its mass at +inf."""


class Unbounded(RestartKitError, ValueError):
    """Raised when no finite time satisfies a quantile-type request."""


class ScheduleInvalid(RestartKitError, ValueError):
    """Raised when a speed schedule violates the decay assumption."""


class ConfigError(RestartKitError, ValueError):
    pass


class SpawnError(RestartKitError, OSError):
    pass


class ClockAnomaly(RestartKitError, RuntimeError):
    pass
