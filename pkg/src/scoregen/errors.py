"""Exception hierarchy shared by the library and the command line.

Each error class carries the process exit code the CLI reports for it.
"""


class ScoregenError(Exception):
    exit_code = 1


class ValidationError(ScoregenError, ValueError):
    """Bad arguments or configuration."""

    exit_code = 2


class UnknownInstrumentError(ValidationError):
    def __init__(self, requested, available):
        self.requested = requested
        self.available = list(available)
        super().__init__(
            f"no part named {requested!r}; available parts: "
            + ", ".join(repr(a) for a in self.available)
        )


class DataError(ScoregenError):
    """Input data is unusable: malformed files, empty or short corpora."""

    exit_code = 3


class ParseError(DataError):
    def __init__(self, message, position=None):
        self.position = position
        if position is not None:
            message = f"{message} (at {position})"
        super().__init__(message)


class SerializationError(DataError):
    pass


class EmptyCorpusError(DataError):
    pass


class InsufficientDataError(DataError):
    def __init__(self, available, required):
        self.available = available
        self.required = required
        super().__init__(
            f"corpus has {available} tokens but at least {required} are required"
        )


class CorruptEncodingError(DataError):
    pass


class CapacityError(DataError):
    pass


class PitchRangeError(DataError):
    pass


class ShapeError(ScoregenError):
    """Tensor or model/dataset shapes do not agree."""

    exit_code = 4


class NumericError(ScoregenError, ArithmeticError):
    exit_code = 5


class WeightFileError(DataError):
    pass


class WeightChecksumError(WeightFileError):
    pass


class WeightShapeError(WeightFileError, ShapeError):
    exit_code = 4


class WeightVersionError(WeightFileError):
    pass
