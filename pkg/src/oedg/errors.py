"""Exception types shared across the package."""


class StructuralError(ValueError):
    """A call violated a structural precondition (shapes, index sets, config values)."""


class EvaluationError(RuntimeError):
    """The objective produced an unusable value. Carries the offending point."""

    def __init__(self, message, x=None):
        super().__init__(message)
        self.x = x


class CapabilityError(NotImplementedError):
    """A registered feature exists in name only (no detector/backend for it here)."""


class GenerationError(RuntimeError):
    """Instance generation could not satisfy its constraints for the given seed."""
