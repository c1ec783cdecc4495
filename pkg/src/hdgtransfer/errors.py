"""Exception hierarchy shared by all modules."""


class HdgError(Exception):
    """Base class for every error raised by this package."""


class InvalidParameterError(HdgError, ValueError):
    pass


class ConfigurationError(HdgError, ValueError):
    pass


class GeometryError(HdgError):
    """A geometric query failed.

    ``last_iterate`` holds the final point of an iterative query when one is
    available, so callers can inspect or fall back.
    """

    def __init__(self, message, last_iterate=None):
        super().__init__(message)
        self.last_iterate = last_iterate


class NoIntersectionError(GeometryError):
    pass


class MeshGenerationError(HdgError):
    pass


class PathConstructionError(HdgError):
    def __init__(self, message, edge=None, point=None):
        super().__init__(message)
        self.edge = edge
        self.point = point


class PreconditionError(HdgError):
    pass


class AssemblyError(HdgError):
    def __init__(self, message, cell=None):
        super().__init__(message)
        self.cell = cell


class SolverError(HdgError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual
