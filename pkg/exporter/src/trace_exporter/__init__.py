"""Hook a sampler loop, record per-step tensors, write ASCTRACE files."""

from .session import (ExportError, ExportSession, FrameError,
                      IncompleteSessionError, SetupError, attach)

__version__ = "0.1.0"

__all__ = [
    "ExportError",
    "SetupError",
    "FrameError",
    "IncompleteSessionError",
    "ExportSession",
    "attach",
    "__version__",
]
