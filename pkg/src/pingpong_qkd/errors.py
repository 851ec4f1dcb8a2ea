"""Exception types shared across the package."""


class InvalidParameterError(ValueError):
    """Raised when an input violates a documented precondition."""


class DegenerateChannelError(ArithmeticError):
    """Raised when a channel transmits nothing that a bound could use.

    Typical causes are a forward branch with zero non-vacuum transmission,
    a backward efficiency of zero, or a detector model whose click
    probability vanishes.
    """
