"""Exception hierarchy.

Every error raised on bad input derives from :class:`EmperorError`, which is
itself a ``ValueError`` so callers that only care about "bad value" can catch
that.
"""


class EmperorError(ValueError):
    """Base class for all data errors raised by this package."""


# model
class WeightSum(EmperorError):
    pass


class NonPositiveWeight(EmperorError):
    pass


class AsymmetricCovariance(EmperorError):
    pass


class NonPDCovariance(EmperorError):
    pass


class ShapeMismatch(EmperorError):
    """Inconsistent array shapes inside one mixture or point set."""


class RaggedRows(EmperorError):
    pass


class NonFiniteEntry(EmperorError):
    pass


class Empty(EmperorError):
    pass


# moments / slicing
class DimensionMismatch(EmperorError):
    pass


class NonUnitDirection(EmperorError):
    pass


class DegreeCapExceeded(EmperorError):
    pass


class InsufficientMoments(EmperorError):
    pass


class NonPositiveEvenMoment(EmperorError):
    pass


# fitting / reconstruction
class TooFewSamples(EmperorError):
    pass


class RankDeficient(EmperorError):
    pass


class SliceFitError(EmperorError):
    """A per-slice fit failed; ``slice_index`` names the slice."""

    def __init__(self, slice_index, cause):
        super().__init__(f"slice {slice_index}: {cause}")
        self.slice_index = slice_index
        self.cause = cause


# pooling / bench
class GeMDomainError(EmperorError):
    pass


class NonFiniteFeature(EmperorError):
    pass


class WidthMismatch(EmperorError):
    pass


class FormatError(EmperorError):
    """Malformed input file. ``path`` and ``line`` locate the problem when known."""

    def __init__(self, message, path=None, line=None):
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)
        self.path = path
        self.line = line
