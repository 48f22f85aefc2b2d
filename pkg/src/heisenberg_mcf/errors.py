"""Exception types shared across the package."""


class CharacteristicPoint(ValueError):
    """The horizontal gradient vanishes (within tolerance) at the requested point."""


class CharacteristicInput(ValueError):
    """An operation defined only for q != 0 received q = 0."""


class PositivityError(ValueError):
    """A quantity required to be strictly positive (r, or a payoff g) was not."""


class OffSurfaceError(ValueError):
    """A sample point does not lie on the zero level set of the field."""

    def __init__(self, point, residual):
        self.point = tuple(float(v) for v in point)
        self.residual = float(residual)
        super().__init__(f"point {self.point} is off the surface (|u| = {self.residual:.3e})")


class PolicyFrameError(RuntimeError):
    """A feedback policy could not build its local frame at a simulated state."""
