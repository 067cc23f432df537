"""Exception hierarchy shared by all modules."""


class PseudodiscError(Exception):
    """Base class for library errors."""


class DomainError(PseudodiscError):
    """A point or image lies outside the region where an object is defined."""


class DiscretizationError(PseudodiscError):
    """The grid cannot resolve the requested space, or truncation is too large."""


class NotAStructure(PseudodiscError):
    """A matrix does not square to minus the identity."""


class ChartError(PseudodiscError):
    """J + J_st is singular, so the complex matrix is undefined."""


class AdmissibilityViolation(PseudodiscError):
    """det(I - A conj(A)) is too close to zero somewhere."""

    def __init__(self, message, point=None, margin=None):
        super().__init__(message)
        self.point = point
        self.margin = margin


class PrecondError(PseudodiscError):
    """An operation was called outside its precondition."""


class StabilizationError(PseudodiscError):
    """Finite-rank holomorphic stabilization failed to make the operator invertible."""


class DivergenceError(PseudodiscError):
    """Newton-Picard residuals grew for too many consecutive steps."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class CoverageError(PseudodiscError):
    """Half-disc data is missing on nodes where the pre-gluing needs it."""


class CertificateError(PseudodiscError):
    """Numerical and analytic kernel counts disagree."""
