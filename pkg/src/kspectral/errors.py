"""Exception types raised across the package."""


class InputError(ValueError):
    """Malformed or inconsistent user input."""


class ParseError(InputError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class NumericalError(ArithmeticError):
    """A factorization or eigen-solve left its admissible numerical regime."""


class RankDeficiencyError(NumericalError):
    def __init__(self, requested, achievable):
        self.requested = requested
        self.achievable = achievable
        super().__init__(
            f"requested rank {requested} exceeds numerical rank {achievable}"
        )


class ConditioningError(NumericalError):
    """Cross-view moment matrix is singular; views are too weakly correlated."""


class DegenerateTensorError(NumericalError):
    """Every restart of the power method collapsed to a zero update."""


class ComponentDegeneracyError(NumericalError):
    """A recovered component has a vanishing eigenvalue or weight."""
