"""Exception types shared across the package."""


class DimensionError(ValueError):
    """Array shapes are incompatible with the requested operation."""


class InputError(ValueError):
    """An input value is outside the operation's domain (NaN, Inf, ...)."""


class InvariantError(RuntimeError):
    """A quantity violated an invariant it is required to satisfy."""


class ConfigurationError(ValueError):
    """Invalid hyperparameters, search settings, or experiment config."""


class UnsupportedLossError(TypeError):
    """The operation needs a loss family it does not support."""


class DivergenceError(RuntimeError):
    """Iterates exceeded the divergence guard."""
