"""Exception types shared across the package."""


class Bose2dError(Exception):
    """Base class for all package errors."""


class DomainError(Bose2dError, ValueError):
    """Argument outside the mathematical domain of the operation."""


class OutOfRegimeError(Bose2dError, ValueError):
    """Input is valid but outside the regime where the expression applies."""


class ValidityError(OutOfRegimeError):
    """Theory evaluated outside its published validity window."""

    def __init__(self, name, ln_l, window):
        self.name = name
        self.ln_l = ln_l
        self.window = window
        lo = "-inf" if window[0] is None else f"{window[0]:g}"
        hi = "+inf" if window[1] is None else f"{window[1]:g}"
        super().__init__(
            f"{name}: ln|ln na^2| = {ln_l:g} outside validity window ({lo}, {hi})"
        )


class NoSolutionError(Bose2dError, ValueError):
    """The implicit equation has no solution for the given input."""


class ConvergenceError(Bose2dError, RuntimeError):
    """An iterative solver failed to reach its residual target."""


class InsufficientDataError(Bose2dError, ValueError):
    """Too few data points for the requested operation."""


class NumericError(Bose2dError, RuntimeError):
    """Internal numerical procedure failed a consistency check."""


class PopulationControlError(Bose2dError, RuntimeError):
    """Walker population collapsed or exploded during a run."""


class DilutenessWarning(UserWarning):
    """Input density outside the intended dilute regime."""


class TimestepWarning(UserWarning):
    """Time step large compared with the local-energy scale."""


class TuningWarning(UserWarning):
    """Sampling parameters outside their recommended window."""
