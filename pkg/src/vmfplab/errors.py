"""Exception types shared across the package."""


class ParameterError(ValueError):
    """A scalar argument or option is outside its admissible range."""


class ShapeError(ValueError):
    """An array does not live on the grid the operation expects."""


class NeutralityViolation(ValueError):
    """A charge density fed to the field solver is not mean-free.

    Carries the offending spatial mean so callers can report how far the
    source is from the torus solvability condition.
    """

    def __init__(self, mean, norm):
        self.mean = mean
        self.norm = norm
        super().__init__(
            f"charge density has nonzero spatial mean {mean:.6e} "
            f"(relative to norm {norm:.6e})"
        )


class StabilityError(RuntimeError):
    """A time step exceeds the stability limit of an explicit scheme."""


class ConsistencyError(RuntimeError):
    """Input violates a structural identity it is supposed to satisfy.

    Carries the measured residual norm.
    """

    def __init__(self, message, residual):
        self.residual = residual
        super().__init__(f"{message} (residual {residual:.6e})")


class PositivityError(ValueError):
    """A density that must be strictly positive dropped below the floor."""


class IterationError(RuntimeError):
    """A fixed-point iteration failed to converge within its cap.

    Carries the residual history.
    """

    def __init__(self, residuals):
        self.residuals = list(residuals)
        super().__init__(
            f"iteration did not converge after {len(self.residuals)} sweeps "
            f"(last residual {self.residuals[-1]:.6e})"
        )


class StateError(RuntimeError):
    """An operation was asked for before the state it needs exists."""
