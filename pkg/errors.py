"""
Error types shared by every Geoseg module.

Each error carries a short machine-readable ``code`` (for example
``"raster-too-small"``) plus a human readable ``detail``; the command-line
entry point maps them onto exit codes.
"""

from typing import Optional


class GeosegError(ValueError):
    """A validation or runtime failure with a stable error code."""

    def __init__(self, code: str, detail: str = ""):
        """
        Initialize the error.

        Args:
            code: Kebab-case error identifier
            detail: Human readable explanation
        """
        self.code = code
        self.detail = detail
        super().__init__(f"{code}: {detail}" if detail else code)


class DivergenceError(GeosegError):
    """Raised when a training or benchmark step produces a non-finite loss."""

    def __init__(self, iteration: int, loss: Optional[float] = None):
        self.iteration = iteration
        self.loss = loss
        super().__init__("divergence", f"non-finite loss {loss} at iteration {iteration}")
