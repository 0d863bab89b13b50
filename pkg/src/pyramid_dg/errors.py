"""Exception hierarchy shared by all modules."""


class PyramidDGError(Exception):
    """Base class for library errors."""


class InvalidParameterError(PyramidDGError, ValueError):
    pass


class SingularityError(PyramidDGError, ValueError):
    """Raised when a rational expression is evaluated at (or too near) the apex t = 1."""


class DegenerateElementError(PyramidDGError):
    """Raised when the mapping Jacobian is non-positive or vanishing."""


class RankDeficiencyError(PyramidDGError):
    pass


class MeshGenerationError(PyramidDGError):
    pass


class ConnectivityError(PyramidDGError):
    pass


class ShapeMismatchError(PyramidDGError, ValueError):
    pass


class StaleTraceError(PyramidDGError):
    """Raised when face traces do not correspond to the current coefficients."""
