"""Errors

All exceptions raised by the package. Anything deriving from ValidationError is caused by the user's input or
data and maps to exit code 1 on the command line; everything else is a runtime failure.
"""


class LccrlError(Exception):
    """
    Base class of every error raised by this package.
    """


class ValidationError(LccrlError, ValueError):
    """
    Input data, configuration or arguments are not acceptable.
    """


class ShapeError(ValidationError):
    """
    Tensor shapes do not agree for the requested operation.
    """


class DomainError(ValidationError):
    """
    A value lies outside the domain of an operation (empty sequence, bad rate, empty corpus, ...).
    """


class EmbeddingIndexError(ValidationError, IndexError):
    """
    An embedding lookup used an index outside the table.
    """


class FormatError(ValidationError):
    """
    A file could not be parsed. The offending line is kept so it can be reported.
    """

    def __init__(self, message, path=None, line_number=None):
        location = ""
        if path is not None:
            location = "{0}:{1}: ".format(path, line_number) if line_number is not None else "{0}: ".format(path)
        super().__init__(location + message)
        self.path = path
        self.line_number = line_number


class TransferError(ValidationError):
    """
    Pre-trained parameters cannot be copied into a model.
    """

    def __init__(self, message, parameter=None):
        super().__init__(message)
        self.parameter = parameter


class CheckpointError(ValidationError):
    """
    A checkpoint file is invalid or does not match the model it is loaded into.
    """


class TruncatedCheckpointError(CheckpointError):
    """
    The checkpoint ended before all declared payload was read.
    """


class CheckpointVersionError(CheckpointError):
    """
    The checkpoint was written by an unsupported format version.
    """


class ContractError(LccrlError):
    """
    A caller broke the contract of an operation.
    """
