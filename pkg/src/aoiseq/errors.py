"""Exception hierarchy shared across the package."""


class AoiseqError(Exception):
    """Base class for all errors raised by aoiseq."""


class ValidationError(AoiseqError, ValueError):
    """Raised when an input violates a documented invariant."""


class LayoutOverlapError(ValidationError):
    """Two kernel rectangles intersect."""


class AllAttractionsZero(AoiseqError):
    """No corpus fixation falls inside any kernel; attraction cannot be normalized."""


class UnknownElement(AoiseqError, KeyError):
    pass


class ZeroDistance(AoiseqError, ValueError):
    pass


class InvalidFuzzifier(AoiseqError, ValueError):
    pass


class RegionViolation(AoiseqError, ValueError):
    """A region-specific formula was evaluated outside its region."""


class UnknownSymbol(AoiseqError, KeyError):
    pass


class EmptySequence(AoiseqError, ValueError):
    pass


class EmptyTrainingSet(AoiseqError, ValueError):
    pass


class DegenerateCorpus(AoiseqError, ValueError):
    """Training corpus spans fewer than two classes."""


class LengthMismatch(AoiseqError, ValueError):
    pass


class FormatError(AoiseqError, ValueError):
    """A file does not follow its documented format."""

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        if path is not None:
            where = f"{path}:{line}: " if line is not None else f"{path}: "
        else:
            where = f"line {line}: " if line is not None else ""
        super().__init__(where + message)
