"""Exception hierarchy shared by all modules."""


class StableFieldsError(Exception):
    """Base class for every error raised by the package."""


class ParameterError(StableFieldsError, ValueError):
    """An argument violates a documented precondition."""


class ConfigurationError(StableFieldsError, ValueError):
    """A discretization or experiment configuration cannot meet its tolerance."""


class NumericalError(StableFieldsError, RuntimeError):
    """Quadrature or another numerical routine failed to converge."""


class InsufficientDataError(StableFieldsError, ValueError):
    """Too few points for a regression or estimator."""


class ConservativeRegimeError(StableFieldsError, ValueError):
    """Operation is only meaningful for fields generated by dissipative actions."""
