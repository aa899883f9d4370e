"""Exception types raised across the package."""


class InvalidArgumentError(ValueError):
    """Bad input: wrong axis, mismatched lattices, invalid configuration."""


class SolverConvergenceError(RuntimeError):
    """The iterative linear solve did not reach its tolerance."""

    def __init__(self, iterations, residual, tolerance):
        self.iterations = iterations
        self.residual = residual
        self.tolerance = tolerance
        super().__init__(
            f"linear solver did not converge after {iterations} iterations "
            f"(relative residual {residual:.3e}, tolerance {tolerance:.1e})"
        )


class BoundaryDensityError(RuntimeError):
    """Wavepacket density reached the edge of a non-periodic potential."""


class MemoryGuardError(RuntimeError):
    """A refined lattice would exceed the configured site cap."""
