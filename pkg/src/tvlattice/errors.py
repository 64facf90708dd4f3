"""Exception hierarchy shared by all modules."""


class TvLatticeError(Exception):
    """Base class for library errors."""


class DimensionError(TvLatticeError, ValueError):
    """Array shapes do not agree."""


class DomainError(TvLatticeError, ValueError):
    """A value lies outside the domain of the operation."""


class NotPositiveDefiniteError(DomainError):
    """A covariance matrix has a non-positive pivot."""


class InsufficientDataError(TvLatticeError, ValueError):
    """Series too short for the requested order."""


class FilterDivergenceError(TvLatticeError, ArithmeticError):
    """A DLM recursion produced a non-positive variance."""

    def __init__(self, t, quantity="q"):
        self.t = int(t)
        self.quantity = quantity
        super().__init__(f"DLM filter diverged at t={self.t} ({quantity} <= 0)")


class GridSearchError(TvLatticeError, ArithmeticError):
    """Every discount pair in a grid diverged."""


class SingularityError(TvLatticeError, ArithmeticError):
    """Transfer matrix is singular at some (t, omega)."""

    def __init__(self, t, omega):
        self.t = int(t)
        self.omega = float(omega)
        super().__init__(f"singular transfer matrix at t={self.t}, omega={self.omega:g}")


class StateError(TvLatticeError, RuntimeError):
    """An operation was called out of order."""
