class CvqkdError(Exception):
    """Base class for errors raised by this package."""


class DomainError(CvqkdError, ValueError):
    """An argument lies outside the domain of the operation."""


class SingularityError(DomainError):
    """Parameters hit a removable-but-unrepresentable point (e.g. eta = 1 with noise)."""


class UnsupportedError(CvqkdError):
    """The operation is not defined for this kind of input."""


class NumericalError(CvqkdError, ArithmeticError):
    """A numerical routine produced a non-finite or unphysical result."""


class CutoffError(NumericalError):
    """Fock truncation loses more probability than allowed."""

    def __init__(self, message, suggested_cutoff=None):
        super().__init__(message)
        self.suggested_cutoff = suggested_cutoff


class PhysicalityError(NumericalError):
    """A density matrix or covariance matrix violates positivity."""
