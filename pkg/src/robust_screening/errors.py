"""Exception hierarchy shared by every solver module."""


class ScreeningError(ValueError):
    """Base class for all errors raised by robust_screening."""


class EmptyInstance(ScreeningError):
    pass


class NonPositiveUpper(ScreeningError):
    pass


class LowerExceedsUpper(ScreeningError):
    pass


class DomainError(ScreeningError):
    """Argument outside the mathematical domain of a function."""


class NoSignChange(ScreeningError):
    """Root bracket endpoints have the same sign."""


class OutOfSupport(ScreeningError):
    """Valuation outside the instance support box."""


class ShapeMismatch(ScreeningError):
    """Instance does not have the shape an operation requires."""


class DegenerateInstance(ScreeningError):
    pass


class OverlappingBundles(ScreeningError):
    pass


class UncoveredItem(ScreeningError):
    pass


class TooLarge(ScreeningError):
    """A guarded enumeration or grid would exceed its size limit."""


class NoPartitionExists(ScreeningError):
    pass


class BundleSumOutOfRange(ScreeningError):
    pass
