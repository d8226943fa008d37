"""Exception hierarchy shared by every splitkit module."""


class SplitkitError(Exception):
    """Base class for all errors raised by splitkit."""


class InvalidInputError(SplitkitError, ValueError):
    """An argument violates a documented precondition."""


class NumericFailureError(SplitkitError, ArithmeticError):
    """An iterative numerical routine did not converge.

    Attributes:
        iterations: number of iterations spent before giving up (the cap).
    """

    def __init__(self, message: str, iterations: int | None = None):
        super().__init__(message)
        self.iterations = iterations


class BranchCutError(SplitkitError, ValueError):
    """The principal logarithm is undefined: an eigenvalue sits on the cut.

    For a one-step propagator this usually means the step size is too large
    for backward error analysis to apply.
    """

    def __init__(self, message: str, eigenvalue: complex | None = None):
        super().__init__(message)
        self.eigenvalue = eigenvalue


class ClusteringError(SplitkitError, ValueError):
    """An eigenvalue lies in the dead zone between a cluster and the rest."""


class CatalogError(SplitkitError, KeyError):
    """Unknown scheme name or malformed scheme expression."""

    def __str__(self) -> str:  # KeyError quotes its message otherwise
        return str(self.args[0]) if self.args else ""


class UnsupportedError(SplitkitError, TypeError):
    """Operation not defined for this kind of composition."""


class GenerationError(SplitkitError, RuntimeError):
    """A random test problem could not be generated within the retry cap."""


class FitError(SplitkitError, ValueError):
    """Too few usable points for a least-squares fit."""
