"""Exception hierarchy for deltabench.

Input-side errors map to CLI exit code 2, model-side errors to exit code 3.
"""

from typing import Optional, Sequence


class DeltaBenchError(Exception):
    """Base class for every error raised by deltabench."""

    exit_code = 1


class ParameterError(DeltaBenchError, ValueError):
    """Invalid model or function parameters."""

    exit_code = 2


class InputError(DeltaBenchError):
    """Malformed, missing or unsorted input data."""

    exit_code = 2


class ConfigurationError(DeltaBenchError):
    """Invalid configuration file, override or experiment layout."""

    exit_code = 2


class ModelError(DeltaBenchError):
    """A pricing, fitting, training or evaluation step failed.

    Args:
        message: Human readable description
        model: Name of the failing model, when known
    """

    exit_code = 3

    def __init__(self, message: str, model: Optional[str] = None):
        self.model = model
        if model:
            message = f"[{model}] {message}"
        super().__init__(message)


class NumericalError(ModelError):
    """Quadrature or root search did not converge."""

    def __init__(self, message: str, model: Optional[str] = None, **diagnostics):
        self.diagnostics = diagnostics
        if diagnostics:
            detail = ", ".join(f"{k}={v}" for k, v in diagnostics.items())
            message = f"{message} ({detail})"
        super().__init__(message, model)


class InversionError(ModelError):
    """Option price outside the no-arbitrage bounds of the inversion."""


class FitError(ModelError):
    """Regression or nonlinear fit failed.

    Args:
        message: Description of the failure
        model: Model name
        columns: Offending design columns (collinear set)
        last_iterate: Final parameter vector of an iterative fit
    """

    def __init__(self, message: str, model: Optional[str] = None,
                 columns: Sequence[str] = (), last_iterate=None):
        self.columns = list(columns)
        self.last_iterate = last_iterate
        if self.columns:
            message = f"{message}; collinear columns: {', '.join(self.columns)}"
        super().__init__(message, model)


class StateError(ModelError):
    """Model used before it was fitted."""


class TrainingError(ModelError):
    """Neural network training could not run."""


class EvaluationError(ModelError):
    """Empty tables, zero baselines or other evaluation domain errors."""
