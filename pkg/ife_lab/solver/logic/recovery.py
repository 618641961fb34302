"""Immersed polynomial preserving gradient recovery and the recovery-based error estimator.

An IFE solution is first moved onto a local body-fitted sub-mesh (parent vertices plus
the interface crossing points). Each side of that sub-mesh is then recovered separately
by least-squares quadratic fits over vertex patches.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Tuple

import numpy as np
from ovos_utils.log import LOG
from scipy import sparse
from scipy.linalg import lstsq, svdvals

from ife_lab.solver.logic.errors import RecoveryDegenerateError
from ife_lab.solver.logic.ife_space import FemSpace
from ife_lab.solver.logic.mesh import InterfaceMesh
from ife_lab.solver.logic.problem import MINUS, PLUS
from ife_lab.solver.logic.quadrature import quad_triangle, reference_rule
from ife_lab.solver.logic.utils import fan_triangles, worker_count

MAX_RINGS = 4
# strictly more nodes than quadratic coefficients, so no fit interpolates its patch
MIN_QUADRATIC_NODES = 7
MAX_CONDITION = 1e3
TRACE_TOLERANCE = 1e-10
ESTIMATOR_DEGREE = 4
SIDE_NAMES = {MINUS: "minus", PLUS: "plus"}


@dataclass(frozen=True, eq=False)
class BodyFittedSubmesh:
    """Sub-triangulation aligned with the polyline interface.

    Vertices ``0..n_parent_vertices-1`` are the parent mesh vertices; the rest are edge
    crossing points. ``side`` and ``parent`` are per sub-triangle.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    side: np.ndarray
    parent: np.ndarray
    n_parent_vertices: int
    crossing_vertex: Dict[int, int]

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    def side_vertices(self, side: int) -> np.ndarray:
        """Mask of the vertices of the minus or plus sub-mesh."""
        mask = np.zeros(self.n_vertices, dtype=bool)
        mask[self.triangles[self.side == side].ravel()] = True
        return mask

    @property
    def area(self) -> float:
        p = self.vertices[self.triangles]
        e1, e2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
        return float(np.sum(0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])))


@dataclass(frozen=True, eq=False)
class RecoveredField:
    """Nodal recovered gradients of each side; rows of vertices off a side are NaN."""

    submesh: BodyFittedSubmesh
    grad_minus: np.ndarray
    grad_plus: np.ndarray

    def nodal(self, side: int) -> np.ndarray:
        return self.grad_minus if side < 0 else self.grad_plus

    def triangle_gradients(self) -> np.ndarray:
        """Nodal gradients (S, 3, 2) of every sub-triangle taken from its own side."""
        tri = self.submesh.triangles
        return np.where(self.submesh.side[:, None, None] < 0, self.grad_minus[tri], self.grad_plus[tri])

    def evaluate(self, bary) -> np.ndarray:
        """Linear interpolation of the nodal gradients at barycentric points (q, 3): (S, q, 2)."""
        return np.einsum("qk,skd->sqd", np.asarray(bary), self.triangle_gradients())


def _submesh_vertex(key: int, crossing_vertex: Dict[int, int]) -> int:
    return key if key >= 0 else crossing_vertex[-key - 1]


def build_submesh(mesh: InterfaceMesh, splits=None) -> BodyFittedSubmesh:
    """Fan-triangulate both parts of every interface element; regular elements are kept.

    Args:
        mesh (InterfaceMesh): Classified mesh.
        splits (dict): Split geometry per interface element, defaults to the mesh's own.
    """
    splits = mesh.splits if splits is None else splits
    crossing_vertex, new_points = {}, []
    for element in sorted(splits):
        split = splits[element]
        for key, point in zip(split.cut_keys, split.cut_points):
            if key < 0 and -key - 1 not in crossing_vertex:
                crossing_vertex[-key - 1] = mesh.n_vertices + len(new_points)
                new_points.append(point)

    regular = np.flatnonzero(mesh.element_class != 0)
    triangles = [mesh.triangles[regular]]
    sides = [np.where(mesh.element_class[regular] < 0, MINUS, PLUS)]
    parents = [regular]
    for element in sorted(splits):
        split = splits[element]
        for side, keys in ((MINUS, split.minus_keys), (PLUS, split.plus_keys)):
            ids = [_submesh_vertex(key, crossing_vertex) for key in keys]
            fan = np.array([[ids[i] for i in tri] for tri in fan_triangles(ids)], dtype=int)
            triangles.append(fan)
            sides.append(np.full(len(fan), side))
            parents.append(np.full(len(fan), element))

    vertices = np.vstack([mesh.vertices, np.reshape(new_points, (-1, 2))])
    submesh = BodyFittedSubmesh(
        vertices=vertices,
        triangles=np.vstack(triangles).astype(int),
        side=np.concatenate(sides).astype(int),
        parent=np.concatenate(parents).astype(int),
        n_parent_vertices=mesh.n_vertices,
        crossing_vertex=crossing_vertex,
    )
    LOG.debug(f"Body-fitted sub-mesh: {submesh.n_vertices} vertices, {len(submesh.triangles)} triangles")
    return submesh


def enrich(space: FemSpace, u_h, sub: BodyFittedSubmesh) -> np.ndarray:
    """Continuous P1 values on the sub-mesh: u_h at parent vertices, averaged traces at crossings."""
    u_h = np.asarray(u_h, dtype=float)
    values = np.zeros(sub.n_vertices)
    values[: sub.n_parent_vertices] = u_h
    totals = np.zeros(sub.n_vertices)
    counts = np.zeros(sub.n_vertices)
    worst = 0.0
    for element, basis in space.local.items():
        local_u = u_h[space.mesh.triangles[element]]
        for key, point in zip(basis.split.cut_keys, basis.split.cut_points):
            if key >= 0:
                continue
            vertex = sub.crossing_vertex[-key - 1]
            traces = [float((space.piece_values(element, side, point) @ local_u)[0]) for side in (MINUS, PLUS)]
            worst = max(worst, abs(traces[0] - traces[1]))
            totals[vertex] += traces[0] + traces[1]
            counts[vertex] += 2
    crossing = counts > 0
    values[crossing] = totals[crossing] / counts[crossing]
    if worst > TRACE_TOLERANCE:
        LOG.warning(f"IFE traces disagree by up to {worst:.3e} at interface points; using their average")
    return values


def side_adjacency(sub: BodyFittedSubmesh, side: int) -> sparse.csr_matrix:
    """Vertex-to-vertex connectivity through the sub-triangles of one side."""
    tri = sub.triangles[sub.side == side]
    rows = tri[:, [0, 1, 2, 1, 2, 0]].ravel()
    cols = tri[:, [1, 2, 0, 0, 1, 2]].ravel()
    graph = sparse.coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(sub.n_vertices,) * 2).tocsr()
    graph.data[:] = 1.0
    return graph


def _quadratic_basis(xi, eta):
    return np.column_stack([np.ones_like(xi), xi, eta, xi * xi, xi * eta, eta * eta])


def _fit_gradient(points, values, center, degree):
    """Least-squares polynomial fit in scaled coordinates.

    Returns None for under-determined or ill-conditioned patches, including nodes that
    (nearly) lie on one conic.
    """
    offsets = points - center
    scale = float(np.max(np.linalg.norm(offsets, axis=1)))
    if scale == 0.0:
        return None
    xi, eta = offsets[:, 0] / scale, offsets[:, 1] / scale
    basis = _quadratic_basis(xi, eta) if degree == 2 else np.column_stack([np.ones_like(xi), xi, eta])
    if len(points) < basis.shape[1]:
        return None
    singular = svdvals(basis)
    if singular[-1] == 0.0 or singular[0] / singular[-1] > MAX_CONDITION:
        return None
    coefficients = lstsq(basis, values)[0]
    return coefficients[1:3] / scale


class PatchRecovery:
    """Per-vertex PPR gradient on one side mesh."""

    def __init__(self, vertices, adjacency: sparse.csr_matrix, values, side: int):
        self.vertices = vertices
        self.adjacency = adjacency
        self.values = np.asarray(values, dtype=float)
        self.side = side

    def neighbours(self, nodes):
        indptr, indices = self.adjacency.indptr, self.adjacency.indices
        return np.unique(np.concatenate([indices[indptr[n] : indptr[n + 1]] for n in nodes]))

    def rings(self, vertex):
        """Yield the patch after 1, 2, ... MAX_RINGS rings of neighbours."""
        patch = np.array([vertex])
        for _ in range(MAX_RINGS):
            patch = np.union1d(patch, self.neighbours(patch))
            yield patch

    def __call__(self, vertex: int) -> np.ndarray:
        center = self.vertices[vertex]
        patch = None
        for rings, patch in enumerate(self.rings(vertex), start=1):
            if len(patch) < MIN_QUADRATIC_NODES:
                continue
            gradient = _fit_gradient(self.vertices[patch], self.values[patch], center, 2)
            if gradient is not None:
                if rings > 1:
                    LOG.debug(f"Vertex {vertex} ({SIDE_NAMES[self.side]}): patch widened to {rings} rings")
                return gradient
        gradient = _fit_gradient(self.vertices[patch], self.values[patch], center, 1)
        if gradient is None:
            raise RecoveryDegenerateError(int(vertex), SIDE_NAMES[self.side])
        LOG.warning(f"Vertex {vertex} ({SIDE_NAMES[self.side]}): quadratic patch degenerate, using a linear fit")
        return gradient


def ppr_recover(sub: BodyFittedSubmesh, side: int, values, workers=None) -> np.ndarray:
    """Recovered nodal gradients (N, 2) on one side mesh; NaN for vertices not on that side."""
    recovery = PatchRecovery(sub.vertices, side_adjacency(sub, side), values, side)
    nodes = np.flatnonzero(sub.side_vertices(side))
    gradients = np.full((sub.n_vertices, 2), np.nan)
    if len(nodes) == 0:
        return gradients
    with ThreadPoolExecutor(max_workers=workers or worker_count()) as pool:
        gradients[nodes] = np.array(list(pool.map(recovery, nodes)))
    return gradients


def recover(space: FemSpace, u_h, sub: BodyFittedSubmesh = None) -> RecoveredField:
    """R_h u_h: enrich onto the sub-mesh, then recover each side independently."""
    sub = sub or build_submesh(space.mesh, {t: b.split for t, b in space.local.items()})
    values = enrich(space, u_h, sub)
    return RecoveredField(
        submesh=sub, grad_minus=ppr_recover(sub, MINUS, values), grad_plus=ppr_recover(sub, PLUS, values)
    )


def estimate(space: FemSpace, u_h, rec: RecoveredField) -> Tuple[np.ndarray, float]:
    """Per-element eta_T = ||beta^1/2 (R_h u_h - grad u_h)||_T and eta_h = (sum eta_T^2)^1/2."""
    sub = rec.submesh
    bary, _ = reference_rule(ESTIMATOR_DEGREE)
    rule = quad_triangle(sub.vertices[sub.triangles], ESTIMATOR_DEGREE)
    recovered = rec.evaluate(bary)
    grad_minus, grad_plus = space.gradients(u_h)
    discrete = np.where(sub.side[:, None] < 0, grad_minus[sub.parent], grad_plus[sub.parent])
    x, y = rule.points[..., 0], rule.points[..., 1]
    beta = np.where(sub.side[:, None] < 0, space.beta(MINUS, x, y), space.beta(PLUS, x, y))
    squared = np.sum(rule.weights * beta * np.sum((recovered - discrete[:, None, :]) ** 2, axis=-1), axis=1)
    eta_elements = np.sqrt(np.bincount(sub.parent, weights=squared, minlength=space.mesh.n_triangles))
    return eta_elements, float(np.sqrt(np.sum(eta_elements**2)))


def write_recovery(rec: RecoveredField, path) -> Path:
    """Dump ``x y gx gy side`` for every vertex of each side mesh."""
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="\n") as handle:
        for side in (MINUS, PLUS):
            nodal = rec.nodal(side)
            for vertex in np.flatnonzero(rec.submesh.side_vertices(side)):
                x, y = rec.submesh.vertices[vertex]
                handle.write(f"{x:.17g} {y:.17g} {nodal[vertex, 0]:.17g} {nodal[vertex, 1]:.17g} {side:d}\n")
    LOG.info(f"Recovered gradients written to {path}")
    return path
