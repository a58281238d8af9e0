"""Exception hierarchy for the active clustering package."""


class ActiveClusteringError(Exception):
    """Base class for all errors raised by activeclust."""


class NonConvergence(ActiveClusteringError):
    """Khachiyan iteration hit its cap before reaching the target rounding."""


class PsdViolation(ActiveClusteringError):
    """A metric produced a clearly negative quadratic form."""


class LpFailure(ActiveClusteringError):
    """The hull feasibility solver did not terminate cleanly."""


class EmptyCluster(ActiveClusteringError):
    """A cluster index has no points."""


class InvalidId(ActiveClusteringError, IndexError):
    """A point id outside 0..n-1 was passed to the oracle."""


class NotInEllipsoid(ActiveClusteringError):
    """A point passed to the tessellation lies outside the ellipsoid."""


class QuotaStall(ActiveClusteringError):
    """Sampling ran for too long without any cluster reaching its quota."""


class DegenerateSample(ActiveClusteringError):
    """The baseline's majority sample was empty."""


class GenerationFailure(ActiveClusteringError):
    """An instance generator could not meet its margin contract."""


class PackingTooSmall(GenerationFailure):
    """The sphere packing produced fewer than two points."""


class ParseError(ActiveClusteringError):
    """An instance file could not be parsed."""


class MarginMismatch(ActiveClusteringError):
    """An instance's verified margins fall below its declared margin."""
