"""Exception hierarchy shared by the library and the CLI exit-code contract."""


class BbsrcError(Exception):
    """Base class for every error raised by this package."""

    exit_code = 2


class ValidationError(BbsrcError, ValueError):
    """Bad configuration or arguments (CLI exit code 1)."""

    exit_code = 1


class DataError(BbsrcError, ValueError):
    """Unreadable, malformed or inconsistent input data (CLI exit code 2)."""

    exit_code = 2


class SolverError(BbsrcError, RuntimeError):
    """A numerical routine could not produce a usable answer."""

    exit_code = 2
