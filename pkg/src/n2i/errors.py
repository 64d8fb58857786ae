"""Exception types shared across the toolkit."""


class CapacityError(RuntimeError):
    """Raised when rejection sampling cannot place the requested bubbles."""

    def __init__(self, placed, requested, attempts):
        self.placed = placed
        self.requested = requested
        self.attempts = attempts
        super().__init__(
            f"placed only {placed} of {requested} bubbles "
            f"after {attempts} rejected attempts"
        )


class CalibrationError(RuntimeError):
    """Raised when absorption calibration cannot bracket a solution."""


class NormalizationMismatchError(RuntimeError):
    """Raised when a network is applied with missing or foreign normalization."""
