"""Exception types shared across the package."""


class SamplesLengthMismatch(ValueError):
    """Explicit sample sequence does not match the grid size."""


class InvalidRamp(ValueError):
    """Edge-ramp width outside (0, 0.5]."""


class SingularOrIllConditioned(ArithmeticError):
    """Tridiagonal elimination hit a tiny pivot or the solution failed the
    residual check.  Carries ``step_index`` when raised mid-simulation."""

    def __init__(self, message: str, step_index: int | None = None):
        super().__init__(message)
        self.step_index = step_index


class DivisionNearZero(ArithmeticError):
    """Amplification-factor denominator below the safe magnitude."""


class GridMismatch(ValueError):
    """Two trajectories do not share grid and snapshot layout."""


class TooFewSamples(ValueError):
    """Not enough track samples inside the requested window."""


class TooFewRows(ValueError):
    """Not enough present sweep rows for the requested check."""


class BracketInvalid(ValueError):
    """Formation predicate does not differ across the bisection bracket."""


class EmptySeries(ValueError):
    """A plot series has fewer than two points."""
