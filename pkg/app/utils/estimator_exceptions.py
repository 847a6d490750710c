class EstimatorError(Exception):
    """Base exception for estimator errors"""
    def __init__(self, message: str = "Estimator error"):
        self.message = message
        super().__init__(self.message)


class DegenerateFitError(EstimatorError):
    """Raised when a log-linear fit has no usable points"""
    def __init__(self, message: str = "Degenerate growth-rate fit"):
        super().__init__(message)


class EstimateRejectedError(EstimatorError):
    """Raised when too many samples failed for an estimate to be trusted"""
    def __init__(self, message: str = "Estimate rejected", failures: int = 0, total: int = 0):
        self.failures = failures
        self.total = total
        super().__init__(message)
