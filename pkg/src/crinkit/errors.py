"""Exception hierarchy. Each class carries the CLI exit status it maps to."""


class CrinkitError(Exception):
    exit_code = 1


class CheckFailed(CrinkitError):
    exit_code = 1


class NumericalFailure(CrinkitError):
    exit_code = 1


class ConflictingAssignment(CrinkitError):
    """A construction variable was assigned twice with different values (a bug)."""
    exit_code = 1


class ParseError(CrinkitError):
    exit_code = 2


class DimensionError(CrinkitError):
    exit_code = 3


class InstanceTooLarge(DimensionError):
    exit_code = 3


class PovmError(CrinkitError):
    exit_code = 4


class PreconditionError(CrinkitError):
    exit_code = 5


class CoverageError(CrinkitError):
    exit_code = 6

    def __init__(self, message, level=None):
        super().__init__(message)
        self.level = level


class TruncationError(CrinkitError):
    exit_code = 7
