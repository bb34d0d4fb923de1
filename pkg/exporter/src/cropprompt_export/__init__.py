"""Checkpoint-to-graph export tool for the cropprompt vfm backend."""

from .errors import ExportError, ExportMismatch, UnsupportedCheckpoint
from .export import ExportManifest, export, init_checkpoint

__version__ = "0.1.0"

__all__ = ["ExportError", "ExportMismatch", "UnsupportedCheckpoint",
           "ExportManifest", "export", "init_checkpoint", "__version__"]
