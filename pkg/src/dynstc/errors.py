"""Exception types raised by the library."""


class DomainError(ValueError):
    """A plant vector field produced a non-finite value."""


class ConfigError(ValueError):
    """Invalid trigger or family configuration."""


class IntegrationError(RuntimeError):
    """A fixed-step integration produced a non-finite state."""


class InvalidPhiError(ValueError):
    """A Riccati solution was evaluated outside its positive range."""


class OutOfRegionError(RuntimeError):
    """The trajectory left the region where the stability certificate holds."""

    def __init__(self, message, *, t=None, x=None, e=None, value=None):
        super().__init__(message)
        self.t = t
        self.x = x
        self.e = e
        self.value = value
