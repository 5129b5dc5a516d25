"""Exception types shared across the library."""


class GeodynError(Exception):
    """Base class for all library errors."""


class SingularOriginError(GeodynError):
    """Potential or force evaluated too close to the gravitational singularity."""


class NonConvergenceError(GeodynError):
    """An iterative solve (Newton, quadrature refinement) failed to converge."""


class NonNegativeEnergyError(GeodynError):
    """Elliptic-orbit machinery requested for a state with H >= 0."""


class StabilityBoundaryError(GeodynError):
    """Linear scheme parameters outside the stability region (lambda * h^2 >= 4)."""


class TrajectoryTooShortError(GeodynError):
    """Finite-difference diagnostics need at least three samples."""


class CircularOrbitError(GeodynError):
    """Angle-of-LRL diagnostics are undefined for (near-)circular orbits."""


class UnknownMethodError(GeodynError):
    """Unrecognized integrator or discrete-Lagrangian identifier."""


class ExpressionError(GeodynError):
    """Parse or evaluation failure in the arithmetic expression format."""

    def __init__(self, message: str, line: int = 0, column: int = 0):
        self.line = line
        self.column = column
        if line:
            message = f"line {line}, column {column}: {message}"
        super().__init__(message)
