class CountingError(Exception):
    """Base exception for connection counting errors."""
    def __init__(self, message: str = "Counting error"):
        self.message = message
        super().__init__(self.message)


class RefinementFailedError(CountingError):
    """Raised when Newton refinement does not reach the position tolerance."""
    def __init__(self, message: str = "Newton refinement did not converge"):
        super().__init__(message)


class SingularJacobianError(CountingError):
    """Raised when the shooting Jacobian vanishes at an iterate (conjugate point)."""
    def __init__(self, message: str = "Singular shooting Jacobian (conjugate point)"):
        super().__init__(message)


class CoincidentEndpointsError(CountingError):
    """Raised when x and y are the same torus point and this is not allowed."""
    def __init__(self, message: str = "x and y coincide: continuum-degenerate target"):
        super().__init__(message)


class ContinuumDegeneracyError(CountingError):
    """Raised when a count is flagged as a continuum of returning trajectories."""
    def __init__(self, message: str = "Continuum degeneracy detected; count is unreliable"):
        super().__init__(message)
