"""Exception types raised across the package."""


class DualVolError(Exception):
    """Base class for every error raised by dualvol."""


class UnsupportedComposition(DualVolError):
    """A body composition cannot be evaluated exactly."""


class SingularTransform(DualVolError):
    """A linear map is numerically singular."""


class GenerationFailed(DualVolError):
    """Random body generation exhausted its rejection budget."""


class IterationLimit(DualVolError):
    """An iterative solver hit its iteration cap."""


class DegenerateSpan(DualVolError):
    """A point or direction set does not span the ambient space."""


class BadScheme(DualVolError):
    """Unknown quadrature scheme, or scheme incompatible with dimension/count."""


class NonFiniteIntegrand(DualVolError):
    def __init__(self, node, value):
        super().__init__(f"integrand is {value!r} at node {list(node)!r}")
        self.node = node
        self.value = value


class ExponentOutOfRange(DualVolError):
    """Exponent q outside the range where the formulation converges."""


class GridTooCoarse(DualVolError):
    """Layer-cake discretization error exceeds the requested tolerance."""


class NoContacts(DualVolError):
    """No contact points between the unit sphere and the body boundary."""


class NotInJohnPosition(DualVolError):
    """The body fails the John-position precondition."""
