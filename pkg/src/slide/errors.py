"""Exception types raised across the package."""


class SlideError(Exception):
    """Base class for all package-specific errors."""


class DimensionMismatch(SlideError):
    """Inputs that must agree in shape (rows, view count) do not."""


class ZeroView(SlideError):
    """A view has zero Frobenius norm after column centering."""


class BadGrid(SlideError):
    """Requested tuning-parameter grid is empty or inverted."""


class RankDeficient(SlideError):
    """A matrix that must have full column rank does not."""


class NonFinite(SlideError):
    """NaN or Inf appeared during iteration."""


class TooLarge(SlideError):
    """Requested enumeration would materialize too many structures."""


class TooFewSamples(SlideError):
    """Not enough rows to build the requested fold plan."""


class TooFewColumns(SlideError):
    """Not enough columns in some view to build the requested fold plan."""


class ZeroSignal(SlideError):
    """A signal matrix with zero Frobenius norm where a positive one is required."""


class UnsupportedViews(SlideError):
    """Operation implemented only for a limited number of views."""
