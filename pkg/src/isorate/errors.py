"""Exception types shared across the package."""


class DomainError(ValueError):
    """A distribution parameter lies outside its admissible domain.

    Raised when binding a candidate parameter vector to a risk model.
    Samplers treat it as a prior-support violation (reject and redraw),
    not as a crash.
    """


class QuoteParseError(ValueError):
    """A quote file could not be parsed; carries the offending row number."""

    def __init__(self, message: str, row: int | None = None):
        self.row = row
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)


class ConfigError(ValueError):
    """A run configuration failed validation."""


class StallError(RuntimeError):
    """The accept-reject loop exceeded its proposal budget.

    Usually a sign of a misconfigured prior or loss ratio corridor that
    leaves (almost) no acceptable parameters at the current tolerance.
    """

    def __init__(self, message: str, epsilon: float):
        self.epsilon = epsilon
        super().__init__(f"{message} (current tolerance {epsilon})")


class DegenerateWeightsError(RuntimeError):
    """Importance weights collapsed; no usable particles survive."""
