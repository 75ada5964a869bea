"""Exception types shared across the toolkit.

Invalid plain arguments (bad shapes, out-of-range scalars) raise ValueError
directly; the classes below mark failure modes callers may want to catch
separately, such as malformed image files, unreachable backends, or sample
sets that a statistical fit cannot handle.
"""


class PngError(ValueError):
    """Base class for PNG codec failures."""


class PngDecodeError(PngError):
    """Malformed PNG byte stream.

    ``offset`` is the byte position in the input at which parsing failed.
    """

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class UnsupportedFormatError(PngError):
    """Structurally valid PNG outside the supported subset (color type, depth, interlace)."""


class BackendUnavailableError(RuntimeError):
    """A remote backend could not be reached. The transport cause is chained."""


class RemoteBackendError(RuntimeError):
    """A remote backend answered with an error payload instead of a result."""

    def __init__(self, code: str, message: str, status: int = 0):
        super().__init__(f"{code}: {message}" + (f" (HTTP {status})" if status else ""))
        self.code = code
        self.message = message
        self.status = status


class UnsupportedCapabilityError(RuntimeError):
    """Backend does not implement the requested operation (e.g. no gradients)."""


class DegenerateEmbeddingError(ValueError):
    """Embedding vector was exactly zero before normalization."""


class RecommendationParseError(ValueError):
    """Model response did not contain a usable lighting-parameter JSON object."""


class DegenerateDistributionError(ValueError):
    """Sample set unsuitable for moment matching (all zero, or entirely one-sided)."""


class InsufficientDataError(ValueError):
    """Not enough patches or images to fit or score a quality model."""


class ManifestError(ValueError):
    """Malformed dataset manifest; message names the offending line."""
