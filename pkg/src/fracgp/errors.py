"""Exception hierarchy shared by every fracgp module."""


class FracGPError(Exception):
    """Base class for all errors raised by fracgp."""


class InputError(FracGPError, ValueError):
    """Malformed call arguments (non-finite points, empty sets, bad shapes)."""


class ConfigError(FracGPError, ValueError):
    """Invalid experiment or state configuration."""


class HyperparameterError(FracGPError, ValueError):
    """Kernel hyperparameters outside their valid range, or overflowing."""


class NumericalError(FracGPError, ArithmeticError):
    """A factorization failed even after jitter escalation."""


class InvariantViolation(FracGPError, AssertionError):
    """A run produced a state that the theory rules out."""


class SaturationError(InvariantViolation):
    """The cell holding the global maximizer was flagged saturated."""


class RunAborted(FracGPError):
    """A GP-TS run failed mid-way; ``trace`` holds the completed rounds."""

    def __init__(self, message, trace=None, round_index=None):
        super().__init__(message)
        self.trace = trace
        self.round_index = round_index
