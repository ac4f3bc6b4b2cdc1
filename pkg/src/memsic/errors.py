"""Exception hierarchy shared by every module of the simulator."""


class MemsicError(Exception):
    """Base class for all errors raised by memsic."""


class ConfigurationError(MemsicError, ValueError):
    """An unsupported or inconsistent configuration value."""


class ContractViolation(MemsicError, ValueError):
    """An argument violates a documented precondition (shape, range, ...)."""


class DegenerateChannelError(MemsicError, ValueError):
    """The channel matrix has an all-zero column."""


class DegenerateMatrixError(MemsicError, ValueError):
    """A matrix cannot be mapped to conductances (it is all zeros)."""


class SingularSystemError(MemsicError, ArithmeticError):
    """A linear system that should be solved is singular."""


class CalibrationError(MemsicError, ValueError):
    """Feedback conductances cannot realize the requested regularization."""


class InvalidSelectError(MemsicError, ValueError):
    """A comparator word is not a thermometer code."""
