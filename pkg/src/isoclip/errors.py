"""Exception types raised across the package.

Every failure mode that callers are expected to distinguish gets its own
class so error handling never has to parse messages.
"""


class IsoclipError(Exception):
    """Base class for all package-specific errors."""


class TensorFormatError(IsoclipError):
    """Malformed tensor file (bad structure other than the cases below)."""


class BadMagicError(TensorFormatError):
    """File does not start with the expected magic bytes."""


class UnsupportedVersionError(TensorFormatError):
    """Header declares a format version this reader does not know."""


class UnsupportedDtypeError(TensorFormatError):
    """Header declares an unknown dtype code."""


class TruncatedPayloadError(TensorFormatError):
    """Payload is shorter than the header-declared element count."""


class NarrowingError(IsoclipError):
    """Requested on-disk dtype cannot represent the given values."""


class ManifestError(IsoclipError):
    """Dataset manifest is invalid or references inconsistent files."""


class NonFiniteInputError(IsoclipError):
    """A matrix argument contains NaN or infinity."""


class DegenerateMatrixError(IsoclipError):
    """Operation requires a matrix of rank >= 1."""


class BandEmptyError(IsoclipError):
    """k_t + k_b >= r leaves no retained singular directions."""


class StaleBandError(IsoclipError):
    """BandSelection does not match the rank of the pair it is applied to."""


class DegenerateEmbeddingError(IsoclipError):
    """A feature row projects to (numerically) zero."""

    def __init__(self, row: int, norm: float):
        self.row = row
        self.norm = norm
        super().__init__(f"row {row} has projected norm {norm:.3e} < 1e-12")


class NoPositivesError(IsoclipError):
    """Every query has zero relevant gallery items."""


class EmptyPairClassError(IsoclipError):
    """No positive pairs or no negative pairs to build a histogram from."""


class EmptyClassError(IsoclipError):
    """A requested class has no samples."""


class InfeasibleGridError(IsoclipError):
    """No (k_t, k_b) grid point satisfies k_t + k_b < r."""
