"""Exception types shared across the package."""


class InvalidArgument(ValueError):
    """Raised when an input violates a documented precondition."""


class InadmissibleParameters(InvalidArgument):
    """Raised when embedding parameters fail an admissibility condition.

    ``condition`` carries the short name of the failed condition so that
    callers (and the CLI) can report it verbatim.
    """

    def __init__(self, condition, message=None):
        self.condition = condition
        super().__init__(message or f"inadmissible parameters: {condition}")


class NumericalFailure(RuntimeError):
    """Raised when a computation produces an unusable numerical result."""


class ResidualTooLarge(NumericalFailure):
    """Raised when a field fails its heat-equation residual contract."""
