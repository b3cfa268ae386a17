"""Exception hierarchy shared by all tvarch modules.

Two broad families matter for callers: :class:`InputError` (bad data, bad
configuration, invalid model) and :class:`NumericalError` (the computation
itself degenerated, e.g. a singular local Gram matrix).  The CLI maps them to
exit codes 2 and 3 respectively.
"""


class TvArchError(Exception):
    """Base class for all tvarch errors."""


class InputError(TvArchError):
    """Invalid input data or configuration."""


class NumericalError(TvArchError):
    """A numerical computation degenerated."""


class EmptyWindowError(NumericalError):
    """No observation falls inside the kernel support; bandwidth too small."""


class SingularMomentError(NumericalError):
    """A kernel-smoothed local Gram matrix is numerically singular.

    Typically caused by a noise distribution with mass at zero or by a
    bandwidth too small for the sample size.
    """

    def __init__(self, t: int, rcond: float | None = None):
        self.t = t
        self.rcond = rcond
        msg = f"smoothed moment matrix singular at t={t}"
        if rcond is not None:
            msg += f" (rcond={rcond:.3e})"
        super().__init__(msg)


class SingularDesignError(NumericalError):
    """The weighted residual design matrix of the WLS step is singular."""


class SingularCovarianceError(NumericalError):
    """An estimated covariance matrix is singular or not positive definite."""


class AllSingularError(NumericalError):
    """Every candidate bandwidth on the grid failed."""


class DegenerateSeriesError(NumericalError):
    """The series carries no usable variation (e.g. identically zero)."""


class NonPositiveVolatilityError(NumericalError):
    """A fitted volatility is zero while no regularization is active."""


class ModelValidationError(InputError):
    """A model specification violates its constraints."""


class ContractionError(ModelValidationError):
    """Sum of lag coefficient functions reaches one somewhere on [0, 1]."""

    def __init__(self, u: float, total: float):
        self.u = u
        self.total = total
        super().__init__(f"lag coefficients sum to {total:.6g} >= 1 at u={u:.6g}")


class NonPositiveInterceptError(ModelValidationError):
    """The intercept function is not strictly positive on [0, 1]."""


class ParseError(InputError):
    """A CSV cell could not be parsed."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class NonPositivePriceError(InputError):
    """Price-mode ingestion requires strictly positive values."""
