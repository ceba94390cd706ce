"""Exception hierarchy.

Each class carries the CLI exit code of its error class so that the
command line front end can map failures without inspecting messages.
"""


class ShearlabError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class ConfigError(ShearlabError, ValueError):
    exit_code = 2


class RegimeError(ShearlabError, ValueError):
    """A numerical or mathematical precondition is violated."""

    exit_code = 3


class AdmissibilityError(RegimeError):
    """A profile violates a mean-zero or centering condition."""

    def __init__(self, condition: str, measured: float):
        self.condition = condition
        self.measured = measured
        super().__init__(f"{condition} violated (measured value {measured:.3e})")


class DimensionError(RegimeError):
    pass


class SolvabilityError(RegimeError):
    def __init__(self, weighted_mean: float):
        self.weighted_mean = weighted_mean
        super().__init__(
            f"right-hand side is not solvable: weighted mean {weighted_mean:.3e} != 0"
        )


class StabilityError(RegimeError):
    def __init__(self, dt: float, required: float, what: str = "time step"):
        self.dt = dt
        self.required = required
        super().__init__(f"{what} dt={dt:.3e} too large, need dt <= {required:.3e}")


class InsufficientDataError(RegimeError):
    pass


class ConsistencyError(RegimeError):
    """An internal identity failed; indicates a bug upstream."""


class NumericalBlowupError(RegimeError):
    pass


class ArtifactIOError(ShearlabError, OSError):
    exit_code = 4
