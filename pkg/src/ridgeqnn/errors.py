"""Exception hierarchy.

Everything derives from ``ValueError`` so callers that only care about
"bad input" can catch that, while the CLI distinguishes input errors
(exit code 2) from failed checks (exit code 1).
"""


class RidgeQNNError(ValueError):
    pass


class InvalidStateError(RidgeQNNError):
    pass


class CircuitError(RidgeQNNError):
    pass


class DimensionError(RidgeQNNError):
    pass


class NotUnitaryError(RidgeQNNError):
    pass


class ShiftRuleError(CircuitError):
    pass


class ModelError(RidgeQNNError):
    pass


class TrainingError(RuntimeError):
    """Raised when optimization diverges (non-finite loss)."""

    def __init__(self, message: str, epoch: int | None = None):
        super().__init__(message)
        self.epoch = epoch
