"""Exception types shared across the package."""


class FracObstacleError(Exception):
    """Base class for all package errors."""


class ConfigurationError(FracObstacleError):
    """Invalid or inconsistent user input (domains, parameters, meshes)."""


class AssemblyError(FracObstacleError):
    """Assembly failed, e.g. a coefficient sample is not SPD."""


class NumericalError(FracObstacleError):
    """A numerical invariant was violated (factorization failure,
    negative energy, Krylov breakdown)."""


class ConvergenceFailure(FracObstacleError):
    """An iterative method hit its iteration cap.

    Carries the final residual and iteration count for diagnostics.
    """

    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations
