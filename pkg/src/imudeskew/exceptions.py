"""Exception hierarchy shared by the library and the command line.

Every error class carries the process exit code the CLI uses for it.
"""


class DeskewError(Exception):
    """Base class for all library errors."""

    exit_code = 1


class InvalidInterval(DeskewError, ValueError):
    """A non-positive time step or an out-of-range rotation increment."""

    exit_code = 3


class InvalidRotationIncrement(InvalidInterval):
    """Rotation increment that is non-finite or has norm >= pi."""


class NonMonotoneTimestamps(DeskewError, ValueError):
    exit_code = 4


class ImuCoverageGap(DeskewError, ValueError):
    """The IMU stream does not span the requested time window."""

    exit_code = 5

    def __init__(self, message, sweep_index=None):
        super().__init__(message)
        self.sweep_index = sweep_index


class CardinalityMismatch(DeskewError, ValueError):
    exit_code = 6


class UnsupportedRate(DeskewError, ValueError):
    exit_code = 7


class ConfigError(DeskewError, ValueError):
    """Invalid run configuration; ``line`` is 1-based when known."""

    exit_code = 8

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class FormatError(DeskewError, ValueError):
    """Malformed data file; ``record`` is the 1-based data record number."""

    exit_code = 9

    def __init__(self, message, path=None, record=None):
        where = []
        if path is not None:
            where.append(str(path))
        if record is not None:
            where.append(f"record {record}")
        if where:
            message = f"{': '.join(where)}: {message}"
        super().__init__(message)
        self.path = path
        self.record = record
