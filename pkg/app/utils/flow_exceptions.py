class IntegrationError(Exception):
    """
    Raised when a trajectory leaves the chart domain or stops being finite.

    Carries the last valid state, the time it was reached and, when available,
    the partial trajectory up to that time.
    """
    def __init__(self, message: str = "Integration failed", last_state=None,
                 failure_time: float = None, partial=None):
        self.message = message
        self.last_state = last_state
        self.failure_time = failure_time
        self.partial = partial
        super().__init__(self.message)
