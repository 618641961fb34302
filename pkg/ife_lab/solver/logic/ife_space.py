"""Linear immersed finite element space.

Regular elements use the standard P1 basis. On an interface element each nodal function
is piecewise linear with respect to the segment z4-z5 and satisfies the nodal, continuity
and homogeneous flux conditions.
"""

from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Dict

import numpy as np
from ovos_utils.log import LOG
from scipy.linalg import solve as dense_solve
from scipy.linalg import svdvals

from ife_lab.solver.logic.errors import DegenerateCutError, InvalidArgumentError
from ife_lab.solver.logic.mesh import ElementSplit, InterfaceMesh, perturb_split
from ife_lab.solver.logic.problem import MINUS, PLUS
from ife_lab.solver.logic.utils import barycentric, p1_coefficients, triangle_diameters

SINGULAR_RATIO = 1e-12
PERTURBATION = 1e-6
INSIDE_TOLERANCE = 1e-12


def side_index(side: int) -> int:
    """Storage slot of a side: 0 for minus, 1 for plus."""
    return 0 if side < 0 else 1


@dataclass(frozen=True, eq=False)
class IfeLocalBasis:
    """Coefficients (a, b, c) of phi = a + b x + c y, indexed [function, side slot, coefficient]."""

    split: ElementSplit
    coefficients: np.ndarray
    beta_minus: float
    beta_plus: float

    def piece(self, side: int) -> np.ndarray:
        return self.coefficients[:, side_index(side), :]


def build_ife_basis(split: ElementSplit, points, beta_minus: float, beta_plus: float) -> IfeLocalBasis:
    """Solve the 6x6 system for the three nodal functions of one interface element.

    Args:
        split (ElementSplit): Cut geometry of the element.
        points (np.ndarray): The element's three vertices, counterclockwise.
        beta_minus (float): Coefficient used on T^-.
        beta_plus (float): Coefficient used on T^+.
    """
    if not (beta_minus > 0.0 and beta_plus > 0.0):
        raise InvalidArgumentError(f"beta values must be positive, got {beta_minus}, {beta_plus}")
    points = np.asarray(points, dtype=float)
    center = points.mean(axis=0)
    scale = float(triangle_diameters(points))

    def local(p):
        return (np.asarray(p, dtype=float) - center) / scale

    matrix = np.zeros((6, 6))
    for row, (vertex, side) in enumerate(zip(local(points), split.vertex_sides)):
        offset = 3 * side_index(side)
        matrix[row, offset : offset + 3] = (1.0, vertex[0], vertex[1])
    for row, z in zip((3, 4), local(split.cut_points)):
        matrix[row, :3] = (1.0, z[0], z[1])
        matrix[row, 3:] = (-1.0, -z[0], -z[1])
    nx, ny = split.segment_normal
    top = max(beta_minus, beta_plus)
    matrix[5] = np.array([0.0, beta_minus * nx, beta_minus * ny, 0.0, -beta_plus * nx, -beta_plus * ny]) / top

    singular = svdvals(matrix)
    ratio = singular[-1] / singular[0]
    if ratio < SINGULAR_RATIO:
        raise DegenerateCutError(split.parent, ratio)

    rhs = np.zeros((6, 3))
    rhs[:3, :3] = np.eye(3)
    solution = dense_solve(matrix, rhs)

    # back from scaled local coordinates to a + b x + c y
    local_coefficients = solution.T.reshape(3, 2, 3)
    coefficients = np.empty_like(local_coefficients)
    coefficients[..., 1:] = local_coefficients[..., 1:] / scale
    coefficients[..., 0] = local_coefficients[..., 0] - coefficients[..., 1:] @ center
    return IfeLocalBasis(split, coefficients, float(beta_minus), float(beta_plus))


def _monomials(points):
    p = np.atleast_2d(np.asarray(points, dtype=float))
    return np.column_stack([np.ones(len(p)), p])


@dataclass(frozen=True, eq=False)
class FemSpace:
    """IFE space over a classified mesh; one degree of freedom per mesh vertex."""

    mesh: InterfaceMesh
    p1: np.ndarray
    local: Dict[int, IfeLocalBasis]
    beta_minus: Callable
    beta_plus: Callable

    @property
    def dof(self) -> int:
        return self.mesh.n_vertices

    def beta(self, side: int, x, y):
        return np.asarray((self.beta_minus if side < 0 else self.beta_plus)(x, y), dtype=float)

    @cached_property
    def pieces(self) -> np.ndarray:
        """Per-element coefficients of both pieces, shape (2, M, 3, 3); regular elements repeat P1."""
        table = np.stack([self.p1, self.p1]).copy()
        for element, basis in self.local.items():
            table[:, element] = np.swapaxes(basis.coefficients, 0, 1)
        return table

    def gradients(self, u):
        """Gradient of u_h on the minus and plus piece of every element, each (M, 2)."""
        local_u = np.asarray(u, dtype=float)[self.mesh.triangles]
        grads = np.einsum("smkd,mk->smd", self.pieces[:, :, :, 1:], local_u)
        return grads[0], grads[1]

    @property
    def boundary_dofs(self) -> np.ndarray:
        return np.flatnonzero(self.mesh.boundary_vertices)

    def is_interface(self, element: int) -> bool:
        return element in self.local

    def split(self, element: int) -> ElementSplit:
        return self.local[element].split

    def coefficients(self, element: int, side: int = PLUS) -> np.ndarray:
        """(3, 3) basis coefficients on one piece; regular elements ignore the side."""
        basis = self.local.get(element)
        if basis is None:
            return self.p1[element]
        return basis.piece(side)

    def sides_of(self, element: int, points) -> np.ndarray:
        """Piece used at each point: by segment side on interface elements, by element tag elsewhere."""
        basis = self.local.get(element)
        points = np.atleast_2d(points)
        if basis is not None:
            return basis.split.side_of(points)
        tag = self.mesh.element_class[element] if self.mesh.element_class is not None else PLUS
        return np.full(len(points), MINUS if tag < 0 else PLUS)

    def eval_basis(self, element: int, point):
        """Values (3,) and gradients (3, 2) of the three local basis functions at a point."""
        if not 0 <= element < self.mesh.n_triangles:
            raise InvalidArgumentError(f"No element {element}")
        point = np.asarray(point, dtype=float)
        lam = barycentric(self.mesh.vertices[self.mesh.triangles[element]], point)
        if np.any(lam < -INSIDE_TOLERANCE):
            raise InvalidArgumentError(f"Point {point.tolist()} is outside element {element}")
        side = int(self.sides_of(element, point)[0])
        coefficients = self.coefficients(element, side)
        values = coefficients @ np.array([1.0, point[0], point[1]])
        return values, coefficients[:, 1:].copy()

    def piece_values(self, element: int, side: int, points) -> np.ndarray:
        """Values of the three functions of one piece at points, shape (q, 3)."""
        return _monomials(points) @ self.coefficients(element, side).T

    def evaluate(self, u, element: int, side: int, points):
        """u_h and its gradient on one piece at points: (q,) values and (2,) gradient."""
        coefficients = self.coefficients(element, side)
        local_u = np.asarray(u)[self.mesh.triangles[element]]
        return self.piece_values(element, side, points) @ local_u, local_u @ coefficients[:, 1:]

    def interpolate(self, u: Callable) -> np.ndarray:
        """Nodal interpolant: coefficient j is u at vertex j."""
        vertices = self.mesh.vertices
        return np.asarray(u(vertices[:, 0], vertices[:, 1]), dtype=float) * np.ones(self.dof)


def build_space(mesh: InterfaceMesh, beta_minus: Callable, beta_plus: Callable) -> FemSpace:
    """Build the IFE space; beta on each side is sampled at the midpoint of the cut segment.

    A nearly singular local system is retried once with the cut points nudged toward the
    edge midpoints.
    """
    if not mesh.is_classified:
        raise InvalidArgumentError("The mesh must be classified before building the IFE space")
    p1 = p1_coefficients(mesh.triangle_points)
    local = {}
    for element, split in mesh.splits.items():
        points = mesh.vertices[mesh.triangles[element]]
        try:
            local[element] = _element_basis(split, points, beta_minus, beta_plus)
        except DegenerateCutError as exc:
            LOG.warning(f"{exc}; retrying with cut points moved by {PERTURBATION:g} of the edge")
            local[element] = _element_basis(perturb_split(mesh, split, PERTURBATION), points, beta_minus, beta_plus)
    LOG.debug(f"IFE space: {mesh.n_vertices} dofs, {len(local)} interface elements")
    return FemSpace(mesh=mesh, p1=p1, local=local, beta_minus=beta_minus, beta_plus=beta_plus)


def _element_basis(split, points, beta_minus, beta_plus):
    mx, my = split.segment_midpoint
    return build_ife_basis(split, points, float(beta_minus(mx, my)), float(beta_plus(mx, my)))
