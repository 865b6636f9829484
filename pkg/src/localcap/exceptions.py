"""Exception types raised by localcap."""


class LocalCapacityError(Exception):
    """Base class for all errors raised by this package."""


class CoincidentPoint(LocalCapacityError, ValueError):
    """A field was evaluated (numerically) on top of a transmitter."""


class RegionTooSmall(LocalCapacityError, ValueError):
    pass


class ResourceLimit(LocalCapacityError, RuntimeError):
    pass


class NoPositiveRoot(LocalCapacityError, ValueError):
    pass


class NoConvergence(LocalCapacityError, RuntimeError):
    pass


class NoClosure(LocalCapacityError, RuntimeError):
    """Contour tracing ran out of steps before looping back."""


class GradientVanished(LocalCapacityError, RuntimeError):
    pass


class SeriesDiverging(LocalCapacityError, ArithmeticError):
    """The W distribution series grew before it could converge."""


class FailureRateExceeded(LocalCapacityError, RuntimeError):
    pass
