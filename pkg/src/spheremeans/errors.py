"""Exception hierarchy shared across the package.

Exit-code mapping used by the command line tool:
ValidationError -> 2, ConvergenceError -> 3, InternalConsistencyError -> 4.
"""


class SphereMeansError(Exception):
    """Base class for all package errors."""


class ValidationError(SphereMeansError):
    """Invalid input: bad shapes, out-of-range parameters, malformed files."""


class DimensionMismatchError(ValidationError):
    """Operands live on spheres of different dimension."""


class FormatError(ValidationError):
    """A file does not match the expected schema."""


class CutLocusError(SphereMeansError):
    """A point sits (numerically) on the cut locus of the base point."""


class ValidityError(SphereMeansError):
    """A derivative integral was requested outside its integrable regime.

    The angular integrands of the higher Frechet-function derivatives are
    only integrable when the sphere dimension is large enough relative to
    the derivative order (or when the polar angles are bounded away from
    the antipode).  Evaluating them outside that regime yields garbage, so
    it is refused instead.
    """


class NoValidAlphaError(SphereMeansError):
    """No mixture weight in (0, 1] flattens the Hessian for this hole radius."""


class AccuracyError(SphereMeansError):
    """Quadrature failed to reach the requested tolerance."""

    def __init__(self, message, estimate=None):
        super().__init__(message)
        self.estimate = estimate


class ConvergenceError(SphereMeansError):
    """Iterative mean search did not converge; carries the best iterate."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class InternalConsistencyError(SphereMeansError):
    """A computed quantity violates one of its proven analytic bounds."""


class ExperimentError(SphereMeansError):
    """Too many replicate failures for the experiment to be trustworthy."""


class InvalidWindowError(ValidationError):
    """The growth-order fit window contains non-positive differences."""


class ModelError(SphereMeansError):
    """A distribution family has no member with the requested property."""
