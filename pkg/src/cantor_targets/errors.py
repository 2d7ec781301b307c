"""Exception hierarchy shared by every module."""


class CantorTargetsError(Exception):
    """Base class for all library errors."""


class ParseError(CantorTargetsError, ValueError):
    """A sequence spec or expression does not match the grammar."""

    def __init__(self, message: str, position: int | None = None, text: str | None = None):
        self.position = position
        self.text = text
        if position is not None:
            message = f"{message} (at position {position})"
        super().__init__(message)


class DomainError(CantorTargetsError, ValueError):
    """A sequence term falls outside its valid range."""


class CapExceeded(CantorTargetsError):
    """An exact quantity would exceed the configured size cap."""


class InvalidDigit(CantorTargetsError, ValueError):
    pass


class NotQAdic(CantorTargetsError):
    """The point is not a Q-adic rational within the scan horizon."""


class UnsupportedFamily(CantorTargetsError, ValueError):
    pass


class ScheduleInfeasible(CantorTargetsError):
    def __init__(self, message: str, level: int, constraint: str):
        self.level = level
        self.constraint = constraint
        super().__init__(f"level {level}: {message} [{constraint}]")


class PreconditionUnmet(CantorTargetsError, ValueError):
    pass
