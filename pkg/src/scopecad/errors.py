"""Exception types shared across the package."""


class ScopeCadError(Exception):
    """Base class for all scopecad errors."""


class UnsupportedChannels(ScopeCadError, ValueError):
    """Image has a channel count the operation cannot handle."""


class DimensionMismatch(ScopeCadError, ValueError):
    """Two inputs that must share dimensions do not."""


class TooSmall(ScopeCadError, ValueError):
    """Input is below the minimum size the algorithm supports."""


class OutOfBounds(ScopeCadError, ValueError):
    """A region or placement exceeds the bounds of its container."""


class NoOverlap(ScopeCadError):
    """No displacement candidate leaves a usable overlap region."""


class DidNotConverge(ScopeCadError):
    """Iterative optimisation stalled without reaching its tolerance."""


class Degenerate(ScopeCadError):
    """Estimated transform is numerically degenerate."""


class InsufficientMatches(ScopeCadError):
    """Too few feature matches survive filtering to fit a model."""


class NoConsensus(ScopeCadError):
    """Consensus loop ended below the minimum inlier count."""


class CanvasLimitExceeded(ScopeCadError):
    """Canvas growth would exceed the configured maximum dimensions."""


class ViewportLargerThanSlide(ScopeCadError, ValueError):
    """Requested viewport does not fit inside the slide."""


class BackendFailure(ScopeCadError):
    """Segmentation backend could not produce a mask."""


class MissingGroundTruth(ScopeCadError):
    """Operation requires a slide ground-truth mask that is absent."""
