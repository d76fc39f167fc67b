"""Exception types shared across the toolkit."""


class ConfigurationError(ValueError):
    """An invalid parameter or configuration value."""


class DivergenceError(RuntimeError):
    """A sampler produced a non-finite particle position or gradient.

    Raised by step functions; the run loop catches it, keeps the last
    valid state and marks the trace instead of clipping.
    """

    def __init__(self, message, iteration=None):
        super().__init__(message)
        self.iteration = iteration
