"""Exception types raised by the solvers.

Every numerical failure derives from :class:`NumericalError` so callers (and
the CLI exit-code mapping) can separate bad input from bad numerics.
"""


class TccaError(Exception):
    """Base class for all package errors."""


class ShapeError(TccaError, ValueError):
    """Operands have incompatible dimensions or a mode index is out of range."""


class NumericalError(TccaError, ArithmeticError):
    """Base class for numerical failures."""


class RankDeficient(NumericalError):
    """An unregularized system is singular."""


class NotPsd(NumericalError):
    """A matrix expected to be positive semi-definite has a negative eigenvalue."""


class ZeroInput(NumericalError):
    """An operation received an all-zero operand it cannot handle."""


class DegenerateProjection(NumericalError):
    """A projection (score) sequence has zero variance or a factor collapsed."""


class IllConditioned(NumericalError):
    """A projector or whitening step cannot be formed reliably."""


class Budget(NumericalError):
    """An iterative solver ran out of iterations before meeting its target.

    Attributes
    ----------
    best : ndarray
        Best iterate reached.
    gap : float
        Certified optimality gap of ``best``.
    """

    def __init__(self, message, best=None, gap=float("inf")):
        super().__init__(message)
        self.best = best
        self.gap = gap
