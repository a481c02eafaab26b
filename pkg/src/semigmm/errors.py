"""Exception types shared across the package."""


class FormatError(ValueError):
    """A file does not conform to its declared binary or CSV layout."""


class TruncationError(FormatError):
    """A file's payload is shorter or longer than its header declares."""


class DataError(ValueError):
    """File contents violate a data invariant (e.g. non-finite values)."""


class DegenerateDataError(DataError):
    """Input carries no usable signal (e.g. zero variance everywhere)."""


class RangeError(ValueError):
    """An index or class id falls outside its admissible range."""


class CapacityError(ValueError):
    """A request exceeds what the data can supply (too few samples)."""


class InconsistentLabelError(ValueError):
    """A labeled sample has zero posterior mass under every component."""


class ConsistencyError(ValueError):
    """An operation would corrupt an existing labeled/unlabeled partition."""


class NumericalFailureError(RuntimeError):
    """Optimization produced a non-finite parameter or loss."""

    def __init__(self, message: str, iteration: int | None = None):
        super().__init__(message)
        self.iteration = iteration


class StageError(RuntimeError):
    """A pipeline stage failed; carries the stage name for diagnostics."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause
