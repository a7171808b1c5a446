"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Invalid grid, scheme, initial-data or run configuration."""


class ShapeError(ValueError):
    """Field samples do not match the grid they are used with."""


class UnsupportedIndexError(ValueError):
    """Equivariance index outside the range an operation supports."""


class ResolutionError(ValueError):
    """The grid cannot resolve the requested length scale."""


class CFLViolation(ValueError):
    """Time step exceeds the explicit wave stability bound."""


class InstabilityError(RuntimeError):
    """Non-finite values appeared during time stepping.

    ``last_state`` holds the last state whose samples were all finite.
    """

    def __init__(self, message, last_state=None):
        super().__init__(message)
        self.last_state = last_state


class TrackingLostError(RuntimeError):
    """No admissible root of the orthogonality condition near the previous scale."""

    def __init__(self, message, bracket=None, values=None):
        super().__init__(message)
        self.bracket = bracket
        self.values = values


class DegenerateDenominatorError(RuntimeError):
    """The coefficient multiplying the scaling rate is too close to zero."""


class NotReady(RuntimeError):
    """Not enough history has been recorded to form a time derivative."""


class NotAvailable(RuntimeError):
    """A quantity needs data that the given state does not carry."""
