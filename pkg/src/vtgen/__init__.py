"""Two-way visual/tactile generation with a residue-fusion conditional GAN."""

from vtgen.errors import (
    CheckpointError,
    LMTImportError,
    PreconditionError,
    StateError,
    TrainingFault,
    ValidationError,
)

__version__ = "0.1.0"

__all__ = [
    "CheckpointError",
    "LMTImportError",
    "PreconditionError",
    "StateError",
    "TrainingFault",
    "ValidationError",
    "__version__",
]
