"""Exception hierarchy shared across the package.

Grouping mirrors the CLI exit-code contract: validation problems exit 2,
I/O problems exit 1, backend problems exit 3, evaluation inconsistencies
exit 4.
"""

from __future__ import annotations


class PrismMapError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(PrismMapError):
    """Invalid input data or configuration (CLI exit code 2)."""


class InvalidPolygonError(ValidationError):
    """Side count below 3 cannot form a prism base."""


class InvalidFovError(ValidationError):
    """Field of view outside the open interval (0, 180) degrees."""


class NarrowFovError(ValidationError):
    """FOV below the central angle leaves equator gaps; needs explicit override."""


class AspectRatioError(ValidationError):
    """Input raster is not a strict 2:1 panorama."""

    def __init__(self, width: int, height: int):
        self.width = width
        self.height = height
        super().__init__(
            f"photosphere must be exactly 2:1, got {width}x{height} "
            f"(ratio {width}:{height})"
        )


class ImageDecodeError(ValidationError):
    """Input bytes could not be decoded as a raster image."""


class BackendError(PrismMapError):
    """Labeling backend failure (CLI exit code 3)."""

    def __init__(self, backend: str, message: str):
        self.backend = backend
        super().__init__(f"[backend {backend}] {message}")


class TransportError(BackendError):
    """Remote request failed after exhausting retries."""


class AuthError(BackendError):
    """Remote backend rejected the credentials."""


class QuotaExceededError(BackendError):
    """Remote backend kept rate-limiting past the retry budget."""


class ReplayMissError(BackendError):
    """Replay dump has no record for a requested image hash."""

    def __init__(self, backend: str, image_hash: str):
        self.image_hash = image_hash
        super().__init__(backend, f"no recorded labels for image {image_hash}")


class ConfigurationError(BackendError):
    """Backend selected but not configured (missing key, endpoint, file)."""


class InconsistencyError(PrismMapError):
    """Set-algebra precondition violated during evaluation (CLI exit code 4)."""
