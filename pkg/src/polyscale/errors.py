class PolyscaleError(Exception):
    """Base class for numerical failures raised by this package."""


class ConvergenceError(PolyscaleError):
    """An iterative solver ran out of its iteration budget."""


class BracketError(PolyscaleError):
    """No sign change was found for a root-finding problem."""


class WindowError(PolyscaleError, ValueError):
    """A coupling lies outside the declared near-critical validity window."""


class DomainError(PolyscaleError):
    """The truncated radial domain carries non-negligible mass at its edge."""


class ResolutionError(PolyscaleError):
    """Two routes to the same quantity disagree: the discretization is too coarse."""
