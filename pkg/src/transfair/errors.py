"""
Exception hierarchy for transfair.

Every error raised on purpose by the package derives from ``TransfairError``
and carries the process exit code the CLI reports for it.
"""


class TransfairError(Exception):
    """Base class for all transfair errors.

    Pipeline stages tag errors passing through them with ``in_stage`` so the
    message names the stage and seed needed to reproduce the failure.
    """

    exit_code: int = 1
    stage: str | None = None
    seed: int | None = None

    def in_stage(self, stage: str, seed: int | None = None) -> "TransfairError":
        if self.stage is None:
            self.stage = stage
        if self.seed is None:
            self.seed = seed
        return self

    def __str__(self) -> str:
        message = super().__str__()
        context = []
        if self.stage:
            context.append(f"stage {self.stage}")
        if self.seed is not None:
            context.append(f"seed {self.seed}")
        return f"{message} ({', '.join(context)})" if context else message


# Configuration (exit code 2)


class ConfigError(TransfairError):
    """Invalid configuration file, key or value."""

    exit_code = 2


# Data (exit code 3)


class DataError(TransfairError):
    """Problems with input data or with the evaluation protocol."""

    exit_code = 3


class DataFormatError(DataError):
    """A malformed line or token in an input file."""

    def __init__(self, path: object, line_number: int, message: str):
        self.path = path
        self.line_number = line_number
        super().__init__(f"{path}:{line_number}: {message}")


class EmptyDatasetError(DataError):
    """An input file contained no interactions."""


class CoverageError(DataError):
    """Users present in the interactions are missing from the attribute file."""

    def __init__(self, missing: list[str]):
        self.missing = missing
        preview = ", ".join(missing[:20])
        suffix = f" (and {len(missing) - 20} more)" if len(missing) > 20 else ""
        super().__init__(f"{len(missing)} users have no sensitive label: {preview}{suffix}")


class PoolExhaustedError(DataError):
    """Not enough candidate items left to draw the requested negatives."""


class DomainError(DataError):
    """A user was used in a domain it does not belong to."""


class ProtocolError(DataError):
    """The evaluation protocol was violated (e.g. positive missing from its list)."""


class EmptyCandidatesError(ProtocolError):
    """A ranking was requested over an empty candidate list."""


class DegenerateSplitError(DataError):
    """A random split ended up with a single class."""


class UndefinedMetricError(DataError):
    """A metric is undefined for the given input (e.g. single-class AUC)."""


# Training (exit code 4)


class TrainingFailureError(TransfairError):
    """Training diverged or could not proceed."""

    exit_code = 4

    def __init__(self, message: str, *, stage: str | None = None, epoch: int | None = None):
        self.stage = stage
        self.epoch = epoch
        at = f" at epoch {epoch}" if epoch is not None else ""
        super().__init__(f"{message}{at}")


class NumericError(TransfairError):
    """Errors raised by the numeric kernel."""

    exit_code = 4


class ShapeError(NumericError):
    """Operand shapes do not agree."""


class DegenerateBatchError(NumericError):
    """Batch statistics requested on a batch that is too small."""


class GradCheckError(NumericError):
    """Finite-difference checking could not be carried out."""


# Artifacts (exit code 5)


class CorruptArtifactError(TransfairError):
    """A checkpoint or report file failed validation."""

    exit_code = 5

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"corrupt artifact ({field}): {message}")
