"""Exception types shared across the package.

Everything raised on purpose derives from :class:`EpisignalError`, so
callers can catch one base class at pipeline boundaries.
"""


class EpisignalError(Exception):
    """Base class for all errors raised by this package."""


# --- dataset ---------------------------------------------------------------

class EmptyName(EpisignalError):
    """A county name is empty, or empty after normalization."""


class ParseError(EpisignalError):
    """A cell or row of an input file could not be parsed."""

    def __init__(self, message, row=None, column=None):
        super().__init__(message)
        self.row = row
        self.column = column


class DuplicateCounty(EpisignalError):
    """Two rows normalize to the same county key."""


class MissingNameColumn(EpisignalError):
    """The configured name column is absent from the header."""


class DegenerateColumn(EpisignalError):
    """A feature column is constant, so it cannot be scaled."""


class EmptySeries(EpisignalError):
    """A case series has no observations."""


class EmptySlice(EpisignalError):
    """A period overlaps no dates of the series being sliced."""


# --- cluster ---------------------------------------------------------------

class EmptyMatrix(EpisignalError):
    """The feature matrix has no rows."""


class KTooLarge(EpisignalError):
    """Requested more clusters than there are rows."""


class TooFewPoints(EpisignalError):
    """Not enough curve points to locate a knee."""


class SingleCluster(EpisignalError):
    """Silhouette needs at least two clusters."""


# --- benford ---------------------------------------------------------------

class NonPositive(EpisignalError):
    """First digits are only defined for finite positive values."""


class EmptyAfterFilter(EpisignalError):
    """No usable values remain once nonpositive entries are skipped."""


class SkippedBelowThreshold(EpisignalError):
    """Series total is too small for a meaningful digit audit."""


# --- sarima ----------------------------------------------------------------

class TooShort(EpisignalError):
    """Series is too short for the requested differencing or fit."""


class ZeroVariance(EpisignalError):
    """Autocorrelation is undefined for a constant series."""


class NumericalBreakdown(EpisignalError):
    """A recursion lost positive definiteness and cannot continue."""


class NonInvertibleParams(EpisignalError):
    """AR or MA polynomial has a root on or inside the unit circle."""


class DegenerateSeries(EpisignalError):
    """Differenced series is constant; the model is not estimable."""


class HorizonZero(EpisignalError):
    """Forecast horizon must be at least one step."""


class AllFitsFailed(EpisignalError):
    """Every candidate specification failed to fit."""


# --- pipeline --------------------------------------------------------------

class MissingCluster(EpisignalError):
    """No parameter table entry for the requested cluster id."""


class HoldoutTooLarge(EpisignalError):
    """Holdout window leaves too little data to fit on."""


class ConfigError(EpisignalError):
    """A run configuration file or override is invalid."""
