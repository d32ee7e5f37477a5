"""Exception hierarchy shared by all modules."""


class MCQMError(Exception):
    """Base class for errors raised by this package."""


class DimensionError(MCQMError, ValueError):
    """Operands live in spaces of different dimension."""


class HermiticityError(MCQMError, ValueError):
    """A matrix expected to be self-adjoint is not, within tolerance.

    ``location`` holds the (row, col) index of the worst violation and
    ``deviation`` its magnitude ``|M[i, j] - conj(M[j, i])|``.
    """

    def __init__(self, msg, location=None, deviation=None):
        super().__init__(msg)
        self.location = location
        self.deviation = deviation


class ProblemFormatError(MCQMError, ValueError):
    """A problem file could not be parsed."""


class DegenerateLevel(MCQMError):
    """The selected unperturbed level has a kernel of dimension > 1."""

    def __init__(self, msg, kernel_dim=None):
        super().__init__(msg)
        self.kernel_dim = kernel_dim


class ObstructionFailure(MCQMError):
    """The right-hand side of an order-k equation has a cohomology component."""

    def __init__(self, msg, order=None, norm=None):
        super().__init__(msg)
        self.order = order
        self.norm = norm


class NotMaurerCartan(MCQMError, ValueError):
    """An element fails the Maurer-Cartan equation or the required normal form."""


class GaugeDomainError(MCQMError, ValueError):
    """The group product left the domain of the principal matrix logarithm."""


class TrackingFailure(MCQMError):
    """Eigenvalue continuation along the coupling grid became ambiguous."""


class DiagramError(MCQMError, ValueError):
    """A tree diagram violates the construction rules."""
