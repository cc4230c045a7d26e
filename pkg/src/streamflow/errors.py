"""Exception types shared across the package.

The CLI maps these onto exit codes: configuration problems exit with 2,
numerical failures with 3.
"""


class StreamflowError(Exception):
    """Base class for all package-specific errors."""


class ConfigurationError(StreamflowError, ValueError):
    """Invalid hyper-parameters, malformed config files, unknown keys."""


class NumericalError(StreamflowError, ArithmeticError):
    """Base class for runtime numerical failures."""


class NumericalDegeneracyError(NumericalError):
    """A matrix factorization failed even at the maximum allowed jitter."""


class TrainingDivergenceError(NumericalError):
    """Training produced a non-finite loss.

    Carries the iteration index at which the divergence was detected
    (``step`` is None when raised outside a training loop).
    """

    def __init__(self, message: str, step: int | None = None):
        super().__init__(message)
        self.step = step


class StiffnessError(NumericalError):
    """The adaptive integrator exceeded its step budget.

    ``last_t`` records the last accepted time point.
    """

    def __init__(self, message: str, last_t: float):
        super().__init__(message)
        self.last_t = last_t
