"""Exception types shared across the package."""


class CapacityError(RuntimeError):
    """A requested computation exceeds a configured resource budget."""


class IntegrationError(RuntimeError):
    """Numerical integration produced a non-finite state.

    Attributes
    ----------
    step : int
        Index of the integration step at which the state became non-finite.
    sample : int or None
        Index of the offending sample within a batched integration, when known.
    """

    def __init__(self, message: str, step: int, sample: int | None = None):
        super().__init__(message)
        self.step = step
        self.sample = sample
