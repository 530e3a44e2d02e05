"""Exception hierarchy shared by every resonare module."""


class ResonareError(Exception):
    """Base class for all package errors."""


class InvalidArgument(ResonareError, ValueError):
    pass


class MeshConformityError(ResonareError):
    """Adjoining blocks do not tile their common interface face-by-face."""


class GeometryError(ResonareError):
    """Inverted or non-convex geometry (``ds . A_f <= 0``) or similar."""


class CaseLoadError(ResonareError):
    """A case file could not be loaded; the message names the offending key."""

    def __init__(self, key, message):
        self.key = key
        super().__init__(f"{key}: {message}")


class SingularImpedanceError(ResonareError):
    pass


class SingularMatrixError(ResonareError):
    def __init__(self, message, row=None):
        self.row = row
        super().__init__(message)


class NoConvergenceError(ResonareError):
    """An iterative process stopped before meeting its tolerance.

    ``partial`` carries whatever the solver had converged so far (a ModeSet for
    eigensolvers, the best iterate for GMRES).
    """

    def __init__(self, message, partial=None, history=None):
        self.partial = partial
        self.history = history if history is not None else []
        super().__init__(message)


class InterpolationFailure(ResonareError):
    pass


class OracleError(ResonareError):
    """Reference computation refused its input (size cap, branch point)."""
