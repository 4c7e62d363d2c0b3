"""Exception types shared across the toolkit."""


class ParameterError(ValueError):
    """A configuration value or argument is out of its valid range."""


class ShapeMismatchError(ValueError):
    """Array arguments do not have compatible shapes."""


class DataError(ValueError):
    """Input data violates a precondition (non-finite values, empty set, ...)."""


class FormatError(ValueError):
    """A binary container is malformed (bad magic, truncated payload, ...)."""


class IntegrityError(ValueError):
    """A container parsed, but its parts are mutually inconsistent."""


class SessionStateError(RuntimeError):
    """An observer-study session was driven through an invalid transition."""


class TrainingDiverged(RuntimeError):
    """The training loss became non-finite; the run was aborted."""

    def __init__(self, epoch: int, step: int, loss_value: float):
        self.epoch = epoch
        self.step = step
        self.loss_value = loss_value
        super().__init__(
            f"training loss became non-finite ({loss_value!r}) at epoch {epoch}, step {step}"
        )


class NumericsError(RuntimeError):
    """A tensor operation produced non-finite values (raised by the NaN-check hook)."""


class ConstantImageWarning(UserWarning):
    """Raised by intensity normalization when the input image is constant."""
