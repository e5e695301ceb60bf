"""
Error Types

Exception hierarchy shared by the numerics and the experiment harness.
Each error also derives from the closest builtin so callers may catch either.
"""


class ProbcubError(Exception):
    """Base class for all probcub errors."""


class ArgumentError(ProbcubError, ValueError):
    """An argument violates an operation's precondition."""


class UnsupportedOperationError(ProbcubError, NotImplementedError):
    """The operation is not defined for this variant."""


class UnsupportedPairError(UnsupportedOperationError):
    """No closed-form kernel mean exists for a (kernel, measure) pair."""

    def __init__(self, kernel: str, measure: str, recognized: bool = False) -> None:
        self.kernel = kernel
        self.measure = measure
        self.recognized = recognized
        status = "recognized but not implemented" if recognized else "not supported"
        super().__init__(
            f"Kernel mean for ({kernel}, {measure}) is {status}; "
            "use an empirical kernel mean instead"
        )


class ConditioningError(ProbcubError, ArithmeticError):
    """A Gram matrix could not be factorised, or a variance is badly negative."""

    def __init__(
        self,
        message: str,
        condition: float | None = None,
        jitter: float | None = None,
    ) -> None:
        self.condition = condition
        self.jitter = jitter
        if condition is not None:
            message = f"{message} (condition estimate {condition:.3e})"
        super().__init__(message)


class DegenerateChainError(ProbcubError, RuntimeError):
    """A Markov chain accepted no proposals."""


class CapacityError(ProbcubError, ValueError):
    """A request exceeds a generator's built-in capacity."""


class DesignFileError(ProbcubError, OSError):
    """A spherical design file is missing or unusable."""


class DesignParseError(DesignFileError):
    """A design file line could not be parsed."""

    def __init__(self, path: str, line_number: int, line: str) -> None:
        self.path = path
        self.line_number = line_number
        super().__init__(f"{path}:{line_number}: cannot parse {line.strip()!r}")


class DesignValidationError(DesignFileError):
    """A design point is too far from the unit sphere to renormalise."""


class ConfigError(ProbcubError, ValueError):
    """An experiment configuration is invalid."""


class EvaluatorError(ProbcubError, OSError):
    """An external integrand evaluator failed or broke the line protocol."""
