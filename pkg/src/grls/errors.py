"""Domain exceptions."""


class GrlsError(Exception):
    """Base class for all library-specific failures."""


class DimensionMismatch(GrlsError):
    """Operands live in incompatible spaces."""


class RankDeficient(GrlsError):
    """A matrix required to have full column rank does not."""


class HorizonTooShort(GrlsError):
    """Trajectory shorter than the requested window depth."""


class InsufficientColumns(GrlsError):
    """Not enough Hankel columns to identify a subspace of the requested dimension."""


class NotDetectable(GrlsError):
    """Observability rank stabilized below the state dimension."""

    def __init__(self, achieved_rank: int, n_x: int):
        self.achieved_rank = achieved_rank
        self.n_x = n_x
        super().__init__(
            f"observability rank stabilized at {achieved_rank} < n_x = {n_x}"
        )


class BracketFailure(GrlsError):
    """Multiplier search could not bracket the ball boundary."""
