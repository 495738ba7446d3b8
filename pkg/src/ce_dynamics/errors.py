"""Exception types shared across the package."""


class ValidationError(ValueError):
    """A value violates a documented precondition or invariant."""


class DimensionMismatchError(ValidationError):
    """Vector or tensor dimensions do not line up; names the offender."""


class GameFormatError(ValidationError):
    """Malformed serialized game; carries the byte offset when known."""

    def __init__(self, message, offset=None):
        super().__init__(message)
        self.offset = offset


class StationaryResidualError(RuntimeError):
    """Stationary-distribution solve failed; carries the achieved residual."""

    def __init__(self, message, residual):
        super().__init__(message)
        self.residual = residual
