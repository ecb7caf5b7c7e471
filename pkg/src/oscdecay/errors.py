"""Exception types shared across the package."""


class InvalidArgument(ValueError):
    """An argument is outside the domain of the operation."""


class PreconditionViolated(ValueError):
    """The inputs do not satisfy a structural requirement of the operation."""


class BudgetExceeded(RuntimeError):
    """A quadrature ran out of panels before reaching the requested accuracy.

    The best value obtained so far is kept on ``best`` so callers can still
    report a partial result.
    """

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class DegenerateFit(RuntimeError):
    """A log-log fit was too poor to extract an exponent from.

    The raw samples are attached so they can be written into a report.
    """

    def __init__(self, message, samples=None):
        super().__init__(message)
        self.samples = samples if samples is not None else []
