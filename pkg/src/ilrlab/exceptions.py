"""Exception hierarchy shared by every ilrlab module."""


class IlrLabError(Exception):
    """Base class for all errors raised by ilrlab."""


class DimensionMismatchError(IlrLabError, ValueError):
    """Two objects that must share state/action dimensions do not."""


class InvalidMdpError(IlrLabError, ValueError):
    """An MDP failed validation; ``violations`` lists each offending entry."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("invalid MDP: " + "; ".join(self.violations))


class ReducibleChainError(IlrLabError):
    def __init__(self, message, recurrent_classes=()):
        self.recurrent_classes = [sorted(c) for c in recurrent_classes]
        super().__init__(message)


class PeriodicChainError(IlrLabError):
    pass


class MixingError(IlrLabError):
    """Mixing analysis could not be completed (threshold not crossed, tail uncertified)."""


class SingularSystemError(IlrLabError):
    pass


class NonCommunicatingError(IlrLabError):
    pass


class SolverError(IlrLabError):
    """Relative value iteration hit its iteration cap."""

    def __init__(self, message, span=float("nan")):
        self.span = span
        super().__init__(message)


class SearchSpaceTooLargeError(IlrLabError):
    pass


class NoErgodicExpertError(IlrLabError):
    pass


class SupportTooLargeError(IlrLabError):
    pass
