"""Exception hierarchy. Each class maps to one CLI exit code."""


class SelfactorError(Exception):
    exit_code = 1


class ParameterError(SelfactorError, ValueError):
    """Invalid user-supplied parameter (rule settings, budgets, ranks)."""

    exit_code = 2


class DataError(SelfactorError, ValueError):
    """Malformed or inconsistent input data."""

    exit_code = 3


class NumericError(SelfactorError, ArithmeticError):
    """Non-finite iterates or a degenerate linear-algebra step."""

    exit_code = 4


class DescentViolation(NumericError):
    """The monotone-descent guarantee was broken; indicates a bug."""


class InfeasibleCriterion(SelfactorError):
    """No candidate model satisfies the scale-free criterion's constraint."""

    exit_code = 5
