"""Exception hierarchy shared by all emoclim modules."""


class EmoclimError(Exception):
    """Base class for all errors raised by this package."""


class ConfigurationError(EmoclimError):
    """Invalid hyperparameter, shape mismatch, or bad run configuration."""


class BatchTooSmallError(EmoclimError):
    """Raised when a train-mode operation needs at least 2 batch rows."""


class DegenerateInputError(EmoclimError):
    """Raised when an input row is too close to the zero vector to normalize."""


class StateError(EmoclimError):
    """Operation called out of order, e.g. backward before forward."""


class TrainingError(EmoclimError):
    """Non-finite loss or gradient encountered during optimization."""


class TaxonomyError(EmoclimError):
    """Unknown source label or malformed taxonomy definition."""


class FormatError(EmoclimError):
    """Malformed binary file. Carries the byte offset where parsing failed."""

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class IntegrityError(EmoclimError):
    """Structurally valid file with inconsistent content (e.g. duplicate ids)."""


class EmptyPositivesError(EmoclimError):
    """Every anchor in a contrastive batch had an empty positive set."""


class EvaluationError(EmoclimError):
    """Retrieval or metric computation cannot proceed on the given inputs."""
