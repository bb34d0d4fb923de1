class ExportError(Exception):
    """Base class for export tool errors."""


class UnsupportedCheckpoint(ExportError):
    """Checkpoint file is unreadable or not a recognized architecture."""


class ExportMismatch(ExportError):
    """Exported graphs diverge from the source model beyond tolerance."""
