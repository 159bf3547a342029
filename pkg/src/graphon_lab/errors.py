"""Exception hierarchy shared by all graphon_lab modules."""


class GraphonLabError(Exception):
    """Base class for every error raised by this package."""


class DomainError(GraphonLabError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class InvalidEdgeError(DomainError):
    """A vertex pair does not name a valid edge (self-loop or out of range)."""


class SingularParameterError(DomainError):
    """A closed-form expression is singular at the requested parameters."""


class EmptyWindowError(DomainError):
    """A microcanonical window contains no lattice points."""


class ShapeMismatchError(GraphonLabError, ValueError):
    """Two arrays that must share a block structure do not."""


class ResourceError(GraphonLabError, RuntimeError):
    """A computation would exceed its configured size or complexity guard."""


class ConvergenceError(GraphonLabError, RuntimeError):
    """An iterative method failed to converge.

    Parameters
    ----------
    message : str
        Human readable description.
    diagnostics : object, optional
        Whatever the failing routine had when it gave up (last iterate,
        per-start summaries, ...).
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics


class NoSolutionError(ConvergenceError):
    """A nonlinear system solve did not converge; carries the last iterate."""
