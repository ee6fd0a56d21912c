class ContractError(ValueError):
    """An operation was called outside its precondition."""


class ConfigError(ValueError):
    """Invalid configuration value (bad ratio, tolerance, ...)."""


class ResourceLimitError(RuntimeError):
    """A run would exceed its memory, population or step budget."""


class NumericalRangeError(ArithmeticError):
    """A floating point result would overflow."""
