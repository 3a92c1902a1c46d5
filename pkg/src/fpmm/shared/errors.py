"""Exception hierarchy shared by every module.

The CLI maps ``ValueError`` subclasses to exit code 2 and ``NumericError``
subclasses to exit code 3.
"""

from __future__ import annotations


class MotionTransferError(Exception):
    """Base class for all errors raised by this package."""


class ShapeMismatchError(MotionTransferError, ValueError):
    """Array shapes do not agree with an operation's contract."""


class PriorMapError(MotionTransferError, ValueError):
    """Landmarks, keypoint specs or prior maps are unusable."""


class CheckpointError(MotionTransferError, ValueError):
    """A checkpoint file is malformed or belongs to another configuration."""


class NumericError(MotionTransferError, ArithmeticError):
    """A numeric failure at runtime (non-finite values, singular matrices)."""

    def __init__(self, message: str, *, source: str = "") -> None:
        super().__init__(message)
        self.source = source


class NonFiniteError(NumericError):
    """An operation produced NaN or Inf."""

    def __init__(self, op: str) -> None:
        super().__init__(f"Non-finite values produced by op '{op}'", source=op)
        self.op = op


class SingularJacobianError(NumericError):
    """A keypoint Jacobian cannot be inverted."""

    def __init__(self, keypoint: int, det: float) -> None:
        super().__init__(
            f"Jacobian of keypoint {keypoint} is singular (|det|={abs(det):.3e} <= 1e-6)",
            source=f"keypoint {keypoint}",
        )
        self.keypoint = keypoint
        self.det = det


class TrainingDivergedError(NumericError):
    """A loss term became non-finite during a training step."""

    def __init__(self, term: str, step: int | None = None) -> None:
        where = f" at step {step}" if step is not None else ""
        super().__init__(f"Loss term '{term}' is not finite{where}", source=term)
        self.term = term
        self.step = step
