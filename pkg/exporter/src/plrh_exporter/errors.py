class ExportError(RuntimeError):
    """Base error for export failures."""


class CheckpointError(ExportError):
    """Checkpoint file missing, malformed, or failing its checksum."""


class AnnotationError(ExportError):
    """A listed sample has no usable annotation row."""
