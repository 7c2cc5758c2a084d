"""Exception root shared by every module of the lab."""


class LabError(Exception):
    """Base class for all lab failures.

    ``exit_code`` is what the command-line front end returns when the error
    escapes a command: 3 for configuration problems, 2 for runs that could
    not reach a verdict.
    """

    exit_code: int = 3
