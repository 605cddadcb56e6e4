"""Exception types shared across the package.

File-system failures (unwritable paths and the like) are left to the
builtin OSError; everything that is a *content* or *usage* problem gets
one of the classes below so callers can tell the two apart.
"""


class HitomiError(Exception):
    """Base class for all errors raised by this package."""


class FormatError(HitomiError):
    """A file or byte stream does not conform to its declared layout."""


class ShapeError(HitomiError):
    """Array or band-count mismatch between two values."""


class BoundsError(HitomiError):
    """Pixel coordinate or region outside the frame."""


class DomainError(HitomiError):
    """Scalar argument outside its legal range."""


class DegenerateWhitePlate(HitomiError):
    """White-plate region has a band mean too close to zero to calibrate."""


class DegenerateDataset(HitomiError):
    """Training data lacks the label or category diversity training needs."""


class DegenerateEval(HitomiError):
    """Evaluation is undefined, e.g. no ground-truth boxes at all."""


class SpecError(HitomiError):
    """A scene or dataset specification is internally inconsistent."""
