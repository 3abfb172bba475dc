"""Exception hierarchy shared by all modules and mapped to CLI exit codes."""


class Su2EntError(Exception):
    exit_code = 1


class DomainError(Su2EntError, ValueError):
    """Input outside the admissible quantum-number or parameter domain."""

    exit_code = 3


class SizeLimitError(Su2EntError):
    """Requested sector exceeds a configured size cap."""

    exit_code = 4


class NumericalError(Su2EntError, ArithmeticError):
    """A floating-point result violated a sanity threshold."""

    exit_code = 5


class InvariantViolation(Su2EntError, RuntimeError):
    exit_code = 6
