"""Exception hierarchy shared by all riskgen modules."""


class RiskgenError(Exception):
    """Base class for all riskgen errors."""


class DimensionError(RiskgenError, ValueError):
    """Array shapes or axis lengths are incompatible with an operation."""


class DomainError(RiskgenError, ValueError):
    """An input value is outside the operation's valid domain."""


class SchemaError(RiskgenError, ValueError):
    """A serialized document violates its schema; message names the field path."""


class ConfigurationError(RiskgenError, ValueError):
    """A parameter set violates its construction invariants."""


class SynthesisError(RiskgenError, RuntimeError):
    """Motion synthesis could not produce a feasible candidate set."""


class TrainingError(RiskgenError, RuntimeError):
    """The toy training loop diverged (non-finite loss)."""
