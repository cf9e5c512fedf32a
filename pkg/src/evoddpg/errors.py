"""Exception types shared across the package."""


class NumericError(ArithmeticError):
    """A non-finite value appeared in a gradient, loss or parameter."""


class EmptyBufferError(ValueError):
    """Sampling was requested from a replay buffer holding no episodes."""


class ConfigError(ValueError):
    """A configuration file or override failed validation.

    ``key`` names the offending ``section.key`` when one is known.
    """

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key
