"""Exception hierarchy shared by every pipeline stage.

The CLI maps these onto exit codes: usage problems exit 2, data and format
problems exit 3, numerical failures exit 4.
"""


class GripsenseError(Exception):
    exit_code = 1


class InvalidArgumentError(GripsenseError, ValueError):
    exit_code = 2


class DataError(GripsenseError):
    exit_code = 3


class ParseError(DataError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class FormatError(DataError):
    pass


class SyncError(DataError):
    pass


class RangeError(DataError):
    pass


class EmptyRegionError(DataError):
    pass


class SegmentationError(DataError):
    pass


class MarkerNotFoundError(DataError):
    pass


class DegenerateGeometryError(DataError):
    pass


class CalibrationError(DataError):
    pass


class DatasetError(DataError):
    pass


class InvalidGeometryError(DataError):
    pass


class NumericalError(GripsenseError):
    exit_code = 4
