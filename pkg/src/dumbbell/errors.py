"""Exception hierarchy shared by all modules."""


class DumbbellError(Exception):
    """Base class for every error raised by the package."""


class PreconditionError(DumbbellError, ValueError):
    """An operation was called with arguments outside its domain."""


class GeometryError(DumbbellError):
    """Invalid or self-intersecting domain description."""


class PotentialError(DumbbellError):
    """The potential violates a structural hypothesis."""


class MeshError(DumbbellError):
    """Mesh generation failed (node budget, quality)."""


class MeshMismatchError(DumbbellError):
    """A field was used with an operator built on a different mesh."""


class LocationError(DumbbellError):
    """A probe point lies outside the triangulated domain."""


class BudgetError(DumbbellError):
    """An iterative solver exhausted its iteration budget."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class EigenError(DumbbellError):
    """The smallest-eigenvalue solver stagnated."""


class SeedError(DumbbellError, ValueError):
    """Seed wells are not members of the well set."""


class FitError(DumbbellError):
    """A least-squares fit is rank deficient or underdetermined."""


class SweepError(DumbbellError):
    """Every point of a parameter sweep failed."""
