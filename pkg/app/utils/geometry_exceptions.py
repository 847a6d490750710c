class GeometryError(Exception):
    """Base exception for surface and chart errors."""
    def __init__(self, message: str = "Geometry error"):
        self.message = message
        super().__init__(self.message)


class ChartDomainError(GeometryError):
    """Raised when a point lies outside the chart domain."""
    def __init__(self, message: str = "Point outside chart domain"):
        super().__init__(message)


class UnsupportedOperationError(GeometryError):
    """Raised when an operation is not defined for a surface kind."""
    def __init__(self, message: str = "Operation not supported for this surface"):
        super().__init__(message)


class SamplingConfigurationError(GeometryError):
    """Raised when the Liouville sampler cannot be set up."""
    def __init__(self, message: str = "Rejection bound is not finite"):
        super().__init__(message)


class ExpressionError(GeometryError):
    """Raised when a field expression does not parse in the grammar."""
    def __init__(self, message: str = "Invalid expression"):
        super().__init__(message)
