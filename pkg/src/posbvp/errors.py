"""Exception hierarchy shared by the solver modules."""


class PosBVPError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(PosBVPError, ValueError):
    """An argument lies outside the range a model certifies."""


class EvaluationError(PosBVPError, ArithmeticError):
    """A function evaluation produced a non-finite value."""

    def __init__(self, message, abscissa=None):
        super().__init__(message)
        self.abscissa = abscissa


class GridMismatch(PosBVPError, ValueError):
    """Two grid functions live on different grids."""


class EmptyInterval(PosBVPError):
    """The multiplier interval is empty (no strict ball/quotient gap)."""

    def __init__(self, reason):
        super().__init__(reason)
        self.reason = reason


class NoNontrivialSolution(PosBVPError):
    """The fixed-point iteration collapsed onto the zero solution."""


class Diverged(PosBVPError):
    """An iteration or trajectory left every reasonable bound."""

    def __init__(self, message, when=None):
        super().__init__(message)
        self.when = when


class NotConverged(PosBVPError):
    """Iteration budget exhausted before the stopping test passed."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class Resonance(PosBVPError):
    """Shooting miss vanishes for every slope: λ sits on the linear spectrum."""


class RejectedSolution(PosBVPError):
    """A boundary root was found but fails positivity on the open interval."""

    def __init__(self, message, solution=None):
        super().__init__(message)
        self.solution = solution


class HypothesisViolation(PosBVPError):
    """F(xi)/xi**2 fails to be non-increasing where a run requires it."""
