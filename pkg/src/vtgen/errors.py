"""Exception hierarchy shared by every module.

The CLI maps :class:`ValidationError` (and subclasses) to exit code 3 and
:class:`TrainingFault` / IO failures to exit code 4.
"""


class ValidationError(ValueError):
    """Input failed a value or format check."""


class PreconditionError(ValidationError):
    """An operation was called outside its documented domain."""


class StateError(ValidationError):
    """Data is in the wrong representation (e.g. log instead of amplitude)."""


class LMTImportError(ValidationError):
    """The LMT-style directory could not be imported."""


class CheckpointError(ValidationError):
    """Checkpoint is unreadable or belongs to a different configuration."""


class TrainingFault(RuntimeError):
    """Non-finite loss or activation during training."""

    def __init__(self, message, step=None, last_checkpoint=None):
        super().__init__(message)
        self.step = step
        self.last_checkpoint = last_checkpoint
