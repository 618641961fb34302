"""Assembly of the partially penalized IFE bilinear form, load vector and Newton linearisation.

The volume integrals run over every element (split quadrature on interface elements); the
consistency, adjoint-consistency and penalty terms live only on interior edges crossed by
the interface.
"""

from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, NamedTuple, Optional, Tuple

import numpy as np
from ovos_utils.log import LOG
from scipy import sparse

from ife_lab.solver.logic.errors import AssemblyError
from ife_lab.solver.logic.ife_space import FemSpace
from ife_lab.solver.logic.problem import MINUS, PLUS, PenaltyConfig, ProblemSpec
from ife_lab.solver.logic.quadrature import QuadratureRule, gauss_segment, quad_polygon, quad_triangle, reference_rule

VOLUME_DEGREE = 4


@dataclass(frozen=True, eq=False)
class AssembledSystem:
    """Constrained matrix and load plus the raw (unconstrained) operator they came from."""

    matrix: sparse.csr_matrix
    load: np.ndarray
    stiffness: sparse.csr_matrix
    raw_load: np.ndarray
    dirichlet_dofs: np.ndarray
    dirichlet_values: np.ndarray
    symmetric: bool

    @property
    def dof(self) -> int:
        return self.matrix.shape[0]

    def lift(self) -> np.ndarray:
        """Dirichlet data extended by zero."""
        u = np.zeros(self.dof)
        u[self.dirichlet_dofs] = self.dirichlet_values
        return u

    def free_mask(self) -> np.ndarray:
        mask = np.ones(self.dof, dtype=bool)
        mask[self.dirichlet_dofs] = False
        return mask


class EdgeSegment(NamedTuple):
    """Part of an interface edge lying on one side of the interface."""

    edge: int
    elements: Tuple[int, int]
    side: int
    normal: np.ndarray
    length: float
    rule: QuadratureRule


class _Triplets:
    """COO buffers merged into one sparse matrix."""

    def __init__(self):
        self.rows, self.cols, self.data = [], [], []

    def add(self, dofs_row, dofs_col, block):
        r, c = np.broadcast_arrays(np.asarray(dofs_row)[..., :, None], np.asarray(dofs_col)[..., None, :])
        self.rows.append(r.ravel())
        self.cols.append(c.ravel())
        self.data.append(np.asarray(block, dtype=float).ravel())

    def tocsr(self, size) -> sparse.csr_matrix:
        if not self.data:
            return sparse.csr_matrix((size, size))
        matrix = sparse.coo_matrix(
            (np.concatenate(self.data), (np.concatenate(self.rows), np.concatenate(self.cols))), shape=(size, size)
        ).tocsr()
        matrix.eliminate_zeros()
        return matrix


def _side_values(func, tags, x, y):
    """Evaluate a per-side callable pair on regular elements tagged -1/+1."""
    minus, plus = func(MINUS, x, y), func(PLUS, x, y)
    return np.where(np.asarray(tags)[:, None] < 0, minus, plus)


def _regular_elements(space: FemSpace) -> np.ndarray:
    return np.setdiff1d(np.arange(space.mesh.n_triangles), np.fromiter(space.local, dtype=int, count=len(space.local)))


def assemble_volume(space: FemSpace, spec: ProblemSpec, degree: int = VOLUME_DEGREE):
    """Stiffness triplets for sum_T int_T beta grad(phi_j).grad(phi_i) and the load int f phi_i."""
    mesh = space.mesh
    triplets = _Triplets()
    load = np.zeros(space.dof)

    regular = _regular_elements(space)
    if len(regular):
        tri = mesh.triangles[regular]
        tags = mesh.element_class[regular]
        bary, _ = reference_rule(degree)
        rule = quad_triangle(mesh.vertices[tri], degree)
        x, y = rule.points[..., 0], rule.points[..., 1]
        beta = _side_values(spec.beta, tags, x, y)
        source = _side_values(spec.source, tags, x, y)
        gradients = space.p1[regular][:, :, 1:]
        weight = np.sum(rule.weights * beta, axis=1)
        triplets.add(tri, tri, weight[:, None, None] * gradients @ np.swapaxes(gradients, 1, 2))
        np.add.at(load, tri, np.einsum("mq,qi->mi", rule.weights * source, bary))

    for element, basis in space.local.items():
        dofs = mesh.triangles[element]
        for side in (MINUS, PLUS):
            rule = quad_polygon(basis.split.polygon(side), degree)
            x, y = rule.points[:, 0], rule.points[:, 1]
            gradients = basis.piece(side)[:, 1:]
            weight = rule.integrate(spec.beta(side, x, y))
            triplets.add(dofs, dofs, weight * gradients @ gradients.T)
            load[dofs] += space.piece_values(element, side, rule.points).T @ (rule.weights * spec.source(side, x, y))
    return triplets, load


def _edge_cut(space: FemSpace, edge: int, element: int) -> np.ndarray:
    basis = space.local.get(element)
    if basis is not None and -(edge + 1) in basis.split.cut_keys:
        return basis.split.cut_points[basis.split.cut_keys.index(-(edge + 1))]
    return space.mesh.edge_cuts[edge]


def interface_edge_segments(space: FemSpace) -> Iterator[EdgeSegment]:
    """Both halves of every interface edge with the normal pointing from T_e1 into T_e2."""
    mesh = space.mesh
    centroids = mesh.triangle_points.mean(axis=1)
    for edge in mesh.interface_edges:
        t1, t2 = (int(t) for t in mesh.edge_triangles[edge])
        a, b = mesh.edges[edge]
        pa, pb = mesh.vertices[a], mesh.vertices[b]
        tangent = pb - pa
        length = float(np.linalg.norm(tangent))
        normal = np.array([tangent[1], -tangent[0]]) / length
        if np.dot(normal, centroids[t2] - centroids[t1]) < 0.0:
            normal = -normal
        cut = _edge_cut(space, int(edge), t1)
        for start, end, vertex in ((pa, cut, a), (cut, pb, b)):
            side = MINUS if mesh.vertex_sign[vertex] < 0 else PLUS
            yield EdgeSegment(int(edge), (t1, t2), side, normal, length, gauss_segment(start, end))


def edge_half_functions(space: FemSpace, spec: ProblemSpec, segment: EdgeSegment):
    """Jumps (q, 6) and flux averages (q, 6) of the six element-restricted basis functions."""
    x, y = segment.rule.points[:, 0], segment.rule.points[:, 1]
    beta = spec.beta(segment.side, x, y)
    jumps, averages = [], []
    for element, sign in zip(segment.elements, (1.0, -1.0)):
        values = space.piece_values(element, segment.side, segment.rule.points)
        flux = space.coefficients(element, segment.side)[:, 1:] @ segment.normal
        jumps.append(sign * values)
        averages.append(0.5 * beta[:, None] * flux[None, :])
    return np.hstack(jumps), np.hstack(averages)


def assemble_edge_terms(space: FemSpace, spec: ProblemSpec, cfg: PenaltyConfig) -> sparse.csr_matrix:
    """-int {beta dv/dn}[w] + eps int {beta dw/dn}[v] + sigma0/|e| int [v][w] over interface edges."""
    triplets = _Triplets()
    triangles = space.mesh.triangles
    for segment in interface_edge_segments(space):
        jumps, averages = edge_half_functions(space, spec, segment)
        weights = segment.rule.weights[:, None]
        block = (
            -jumps.T @ (weights * averages)
            + cfg.epsilon * averages.T @ (weights * jumps)
            + (cfg.sigma0 / segment.length) * jumps.T @ (weights * jumps)
        )
        dofs = np.concatenate([triangles[segment.elements[0]], triangles[segment.elements[1]]])
        triplets.add(dofs, dofs, block)
    return triplets.tocsr(space.dof)


def _constrain(matrix: sparse.spmatrix, free: np.ndarray) -> sparse.csr_matrix:
    """Zero Dirichlet rows and columns symmetrically and put ones on their diagonal."""
    keep = sparse.diags(free.astype(float))
    constrained = (keep @ matrix @ keep + sparse.diags((~free).astype(float))).tocsr()
    constrained.eliminate_zeros()
    return constrained


def assemble(space: FemSpace, spec: ProblemSpec, cfg: PenaltyConfig) -> AssembledSystem:
    """Assemble a_h(., .) and (f, .) and impose the Dirichlet data strongly."""
    mesh = space.mesh
    if not mesh.is_classified:
        raise AssemblyError("The mesh must be classified before assembly")
    if spec.flux_jump != 0.0:
        raise AssemblyError(f"Nonzero flux jump g={spec.flux_jump} is not supported")

    triplets, raw_load = assemble_volume(space, spec)
    stiffness = (triplets.tocsr(space.dof) + assemble_edge_terms(space, spec, cfg)).tocsr()

    dirichlet = space.boundary_dofs
    values = np.asarray(spec.dirichlet(mesh.vertices[dirichlet, 0], mesh.vertices[dirichlet, 1]), dtype=float)
    lift = np.zeros(space.dof)
    lift[dirichlet] = values
    free = np.ones(space.dof, dtype=bool)
    free[dirichlet] = False

    load = raw_load - stiffness @ lift
    load[dirichlet] = values
    LOG.debug(f"Assembled {space.dof} dofs, {stiffness.nnz} nonzeros, {len(dirichlet)} Dirichlet dofs")
    return AssembledSystem(
        matrix=_constrain(stiffness, free),
        load=load,
        stiffness=stiffness,
        raw_load=raw_load,
        dirichlet_dofs=dirichlet,
        dirichlet_values=values,
        symmetric=cfg.symmetric,
    )


def assemble_reaction(space: FemSpace, spec: ProblemSpec, u, degree: int = VOLUME_DEGREE):
    """int s(u_h) phi_i and int s'(u_h) phi_i phi_j with u_h taken through the IFE pieces."""
    if spec.nonlinearity is None:
        raise AssemblyError(f"Problem '{spec.name}' has no nonlinear term")
    s, ds = spec.nonlinearity.value, spec.nonlinearity.derivative
    mesh = space.mesh
    u = np.asarray(u, dtype=float)
    triplets = _Triplets()
    reaction = np.zeros(space.dof)

    regular = _regular_elements(space)
    if len(regular):
        tri = mesh.triangles[regular]
        bary, _ = reference_rule(degree)
        rule = quad_triangle(mesh.vertices[tri], degree)
        uh = u[tri] @ bary.T
        np.add.at(reaction, tri, np.einsum("mq,qi->mi", rule.weights * s(uh), bary))
        triplets.add(tri, tri, np.einsum("mq,qi,qj->mij", rule.weights * ds(uh), bary, bary))

    for element, basis in space.local.items():
        dofs = mesh.triangles[element]
        for side in (MINUS, PLUS):
            rule = quad_polygon(basis.split.polygon(side), degree)
            values = space.piece_values(element, side, rule.points)
            uh = values @ u[dofs]
            reaction[dofs] += values.T @ (rule.weights * s(uh))
            triplets.add(dofs, dofs, values.T @ ((rule.weights * ds(uh))[:, None] * values))
    return reaction, triplets.tocsr(space.dof)


def assemble_semilinear(
    space: FemSpace, spec: ProblemSpec, cfg: PenaltyConfig, u_current, system: Optional[AssembledSystem] = None
):
    """Residual A u + M(u) - b and its Jacobian with the Dirichlet dofs held fixed.

    Dirichlet rows of the residual hold u - g; the Jacobian carries identity rows and
    columns there.
    """
    system = system or assemble(space, spec, cfg)
    u = np.asarray(u_current, dtype=float)
    reaction, tangent = assemble_reaction(space, spec, u)
    residual = system.stiffness @ u + reaction - system.raw_load
    residual[system.dirichlet_dofs] = u[system.dirichlet_dofs] - system.dirichlet_values
    jacobian = _constrain(system.stiffness + tangent, system.free_mask())
    return residual, jacobian


def write_system(system: AssembledSystem, path) -> Path:
    """Coordinate dump of the constrained matrix: ``row col value`` per line, 0-based."""
    path = Path(path)
    coo = system.matrix.tocoo()
    with path.open("w", encoding="utf-8", newline="\n") as handle:
        for i, j, value in zip(coo.row, coo.col, coo.data):
            handle.write(f"{i} {j} {value:.17g}\n")
    LOG.info(f"System matrix written to {path}")
    return path
