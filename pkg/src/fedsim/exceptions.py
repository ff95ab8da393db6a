""" Exception hierarchy raised by fedsim.

    Every error derives from `FedSimError` and from the builtin exception that
    best describes it, so callers may catch either."""

__all__ = ["FedSimError", "ConfigurationError", "IngestionError", "InvariantError"]


class FedSimError(Exception):
    """Base class for all errors raised by fedsim."""


class ConfigurationError(FedSimError, ValueError):
    """An input violates a documented precondition: mismatched shapes, invalid
    hyperparameters, unknown config keys, or an unschedulable experiment."""


class IngestionError(FedSimError, ValueError):
    """A federated dataset file could not be read. The message names the offending
    path or user."""


class InvariantError(FedSimError, RuntimeError):
    """An internal invariant was breached (e.g. non-finite parameters). This signals
    a bug or a diverging run, not bad user input."""
