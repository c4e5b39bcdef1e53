"""Exception taxonomy shared by all engine modules."""


class EngineError(Exception):
    """Base class for every error raised by this package."""


class ShapeMismatch(EngineError):
    """Array operands do not share the required shape."""


class LengthMismatch(EngineError):
    """A flat vector does not match the expected length."""


class DimensionMismatch(EngineError):
    """Attention operands disagree on feature dimensions."""


class EmptyMask(EngineError):
    """A mask that must contain at least one foreground pixel is all zeros."""


class InvalidRange(EngineError):
    """A numeric parameter falls outside its valid range."""


class InvalidTimesteps(EngineError):
    """A sampler step was asked to move between invalid timesteps."""


class ParseError(EngineError):
    """A document could not be parsed; carries a location when known."""

    def __init__(self, message: str, location: str | None = None):
        self.location = location
        if location:
            message = f"{message} (at {location})"
        super().__init__(message)


class ValidationError(EngineError):
    """A structurally valid document violates one or more invariants."""

    def __init__(self, violations):
        if isinstance(violations, str):
            violations = [violations]
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class AnnotationParseError(EngineError):
    """An instance-annotation source is malformed or unsupported."""


class MissingGroupKV(EngineError):
    """A pixel group has no key/value entry."""


class UnknownPrompt(EngineError):
    """A toy backend was queried with an unregistered prompt."""


class SegmenterFailure(EngineError):
    """The segmentation backend failed to produce any candidate mask."""


class BackendFailure(EngineError):
    """A model backend failed; carries pipeline stage and object context."""

    def __init__(self, message: str, stage: str | None = None, object_id: str | None = None):
        self.raw_message = message
        self.stage = stage
        self.object_id = object_id
        prefix = []
        if stage:
            prefix.append(f"stage={stage}")
        if object_id:
            prefix.append(f"object={object_id}")
        if prefix:
            message = f"[{' '.join(prefix)}] {message}"
        super().__init__(message)

    def with_context(self, stage: str | None = None, object_id: str | None = None) -> "BackendFailure":
        """Fill in missing stage/object context without clobbering existing values."""
        return BackendFailure(
            self.raw_message,
            stage=self.stage or stage,
            object_id=self.object_id or object_id,
        )
