"""Exceptions raised by the ife-lab solver stages."""


class IfeLabError(Exception):
    """Base class for every ife-lab failure."""


class InvalidArgumentError(IfeLabError, ValueError):
    """An argument is outside the range an operation accepts."""


class GeometryError(IfeLabError):
    """Mesh or split geometry is inconsistent."""


class MeshTooCoarseError(GeometryError):
    """The interface crosses a mesh edge more than once."""

    def __init__(self, edge, vertices):
        self.edge = edge
        self.vertices = tuple(vertices)
        super().__init__(
            f"Interface crosses edge {edge} (vertices {self.vertices[0]}-{self.vertices[1]}) more than once; "
            "refine the mesh"
        )


class DegenerateCutError(GeometryError):
    """The IFE basis system of an interface element is numerically singular."""

    def __init__(self, element, ratio):
        self.element = element
        self.ratio = ratio
        super().__init__(f"Degenerate cut in element {element}: singular value ratio {ratio:.3e}")


class AssemblyError(IfeLabError):
    """The discrete system cannot be assembled from the given inputs."""


class SolverError(IfeLabError):
    """A linear solve failed."""


class NewtonConvergenceError(SolverError):
    """Newton's method did not reach the residual tolerance."""

    def __init__(self, iterations, residual):
        self.iterations = iterations
        self.residual = residual
        super().__init__(f"Newton iteration stopped after {iterations} steps with residual {residual:.3e}")


class RecoveryDegenerateError(IfeLabError):
    """No usable least-squares patch exists for a vertex."""

    def __init__(self, vertex, side):
        self.vertex = vertex
        self.side = side
        super().__init__(f"Gradient recovery degenerate at vertex {vertex} on the {side} side")


class MissingExactSolutionError(IfeLabError):
    """Error norms were requested for a problem without an exact solution."""


class StageError(IfeLabError):
    """Wraps a failure with the refinement level and pipeline stage it happened in."""

    def __init__(self, level, stage, cause):
        self.level = level
        self.stage = stage
        self.cause = cause
        super().__init__(f"Level n={level}, stage '{stage}': {cause}")
