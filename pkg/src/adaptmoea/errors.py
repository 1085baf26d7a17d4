"""Exception types shared across the package."""


class DimensionError(ValueError):
    """Vectors or arrays have incompatible lengths."""


class ParameterError(ValueError):
    """An operator received an out-of-range parameter."""


class DomainError(ValueError):
    """A decision vector lies outside the problem's box."""


class StateError(RuntimeError):
    """An object was used in a state that does not allow the call."""


class ConfigError(ValueError):
    """A scenario or experiment configuration is inconsistent."""


class PolicyLoadError(ValueError):
    """A persisted policy file is malformed or incompatible."""
