"""Exception taxonomy.

Two broad families matter to callers (and to the CLI exit codes):
validation errors (bad configuration or violated preconditions, exit 1)
and data errors (missing or inconsistent inputs, exit 2).
"""


class GranalignError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(GranalignError):
    """A precondition or configuration constraint was violated."""


class EmptyInputError(ValidationError):
    """An operation received an empty input it cannot act on."""


class InfeasibleAlignmentError(ValidationError):
    """The emission matrix is too short to align the target sequence."""

    def __init__(self, n_frames, required_frames):
        self.n_frames = n_frames
        self.required_frames = required_frames
        super().__init__(
            f"alignment infeasible: {n_frames} frames available but the "
            f"target needs at least {required_frames}"
        )


class DataError(GranalignError):
    """Input data is missing, malformed or internally inconsistent."""


class VocabularyError(DataError):
    """A target symbol is absent from the emission symbol table."""


class ConsistencyError(DataError):
    """Two inputs that must agree (counts, labels) do not."""


class NumericError(GranalignError):
    """A computation produced non-finite values."""


class TrainingDivergedError(NumericError):
    """Training loss became non-finite; carries the history so far."""

    def __init__(self, message, history):
        self.history = history
        super().__init__(message)
