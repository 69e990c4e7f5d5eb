"""Exception hierarchy.

Every error carries a short machine-readable ``code`` (the class name) so
the CLI can emit a stable one-line diagnostic.
"""


class ConvexDensError(Exception):
    @property
    def code(self) -> str:
        return type(self).__name__


class InputError(ConvexDensError, ValueError):
    """Malformed user input."""


class EmptyInput(InputError):
    pass


class _IndexedValueError(InputError):
    def __init__(self, index: int, value: float):
        self.index = index
        self.value = float(value)
        super().__init__(f"bad value {float(value)!r} at index {index}")


class NonPositiveValue(_IndexedValueError):
    pass


class NonFiniteValue(_IndexedValueError):
    pass


class NegativeArgument(InputError):
    pass


class NonPositiveKnot(InputError):
    pass


class UnsortedInput(InputError):
    pass


class ParameterOutOfRange(InputError):
    pass


class ModelSpecError(InputError):
    pass


class NonConcaveModel(InputError):
    """Model CDF is not concave (density not non-increasing)."""


class NonConvexModel(InputError):
    """Model density is not convex."""


class ZeroDensityAtObservation(ConvexDensError, ValueError):
    def __init__(self, index: int):
        self.index = index
        super().__init__(f"fitted density vanishes at observation {index}")


class SolverError(ConvexDensError, RuntimeError):
    pass


class SingularGram(SolverError):
    pass


class InitialSupportInfeasible(SolverError):
    pass


class MaxIterExceeded(SolverError):
    """Raised only when the caller asks for strict convergence."""

    def __init__(self, message: str, result=None):
        self.result = result
        super().__init__(message)


class HypothesisViolated(ConvexDensError):
    def __init__(self, hypothesis: str, report=None):
        self.hypothesis = hypothesis
        self.report = report
        super().__init__(f"hypothesis {hypothesis} violated")
