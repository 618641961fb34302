"""Uniform triangulations, level-set interface classification and cut geometry.

Meshes are immutable once built; :func:`classify` returns a new mesh carrying the
element/edge tags and the split geometry of every interface element.
"""

from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Dict, Optional, Tuple

import numpy as np
from ovos_utils.log import LOG
from scipy.optimize import bisect

from ife_lab.solver.logic.errors import GeometryError, InvalidArgumentError, MeshTooCoarseError
from ife_lab.solver.logic.utils import polygon_area, triangle_areas, triangle_diameters

REGULAR_MINUS = -1
INTERFACE = 0
REGULAR_PLUS = 1
CLASS_NAMES = {REGULAR_MINUS: "regular-", INTERFACE: "interface", REGULAR_PLUS: "regular+"}

SNAP_TOLERANCE = 1e-12
SIDE_TIE_TOLERANCE = 1e-14
MAX_BISECTIONS = 200
# interior sample positions used to detect an edge crossed more than once
EDGE_SAMPLES = np.array([0.2, 0.4, 0.6, 0.8])


@dataclass(frozen=True, eq=False)
class LevelSet:
    """Interface description: Omega^- = {phi < 0}, Omega^+ = {phi > 0}."""

    evaluate: Callable
    gradient: Optional[Callable] = None
    name: str = "level set"

    def __call__(self, x, y):
        return self.evaluate(x, y)

    def at(self, points):
        """Evaluate on an array of points with shape (..., 2)."""
        p = np.asarray(points, dtype=float)
        return np.asarray(self.evaluate(p[..., 0], p[..., 1]), dtype=float)


@dataclass(frozen=True, eq=False)
class ElementSplit:
    """Geometry of one interface element cut by the straight segment z4-z5.

    Polygon keys hold the global vertex index for mesh vertices and ``-(edge + 1)``
    for points where the interface crosses an edge.
    """

    parent: int
    cut_points: np.ndarray
    minus_polygon: np.ndarray
    plus_polygon: np.ndarray
    segment_normal: np.ndarray
    minus_keys: Tuple[int, ...]
    plus_keys: Tuple[int, ...]
    cut_keys: Tuple[int, int]
    vertex_sides: np.ndarray

    @property
    def minus_area(self) -> float:
        return polygon_area(self.minus_polygon)

    @property
    def plus_area(self) -> float:
        return polygon_area(self.plus_polygon)

    @property
    def segment_midpoint(self) -> np.ndarray:
        return 0.5 * (self.cut_points[0] + self.cut_points[1])

    def signed_distance(self, points):
        p = np.asarray(points, dtype=float)
        return (p - self.cut_points[0]) @ self.segment_normal

    def side_of(self, points):
        """-1 for points on the T^- side of the segment, +1 otherwise (ties go to +)."""
        distance = self.signed_distance(points)
        return np.where(distance <= -SIDE_TIE_TOLERANCE, -1, 1)

    def polygon(self, side: int) -> np.ndarray:
        return self.minus_polygon if side < 0 else self.plus_polygon


@dataclass(frozen=True, eq=False)
class InterfaceMesh:
    """Triangulation with optional interface classification.

    ``edges`` are sorted vertex pairs; ``edge_triangles[e]`` holds the adjacent triangles
    with the smaller index first (``-1`` marks a missing neighbour on the boundary) and
    ``triangle_edges[t, k]`` is the edge opposite local vertex ``k``.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    edges: np.ndarray
    edge_triangles: np.ndarray
    triangle_edges: np.ndarray
    boundary_vertices: np.ndarray
    h: float
    grid_spacing: float
    level_set: Optional[LevelSet] = None
    vertex_sign: Optional[np.ndarray] = None
    element_class: Optional[np.ndarray] = None
    edge_class: Optional[np.ndarray] = None
    edge_cuts: Dict[int, np.ndarray] = field(default_factory=dict)
    splits: Dict[int, ElementSplit] = field(default_factory=dict)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def is_classified(self) -> bool:
        return self.element_class is not None

    @property
    def interior_edges(self) -> np.ndarray:
        return self.edge_triangles[:, 1] >= 0

    @property
    def interface_elements(self) -> np.ndarray:
        if self.element_class is None:
            return np.zeros(0, dtype=int)
        return np.flatnonzero(self.element_class == INTERFACE)

    @property
    def interface_edges(self) -> np.ndarray:
        if self.edge_class is None:
            return np.zeros(0, dtype=int)
        return np.flatnonzero(self.edge_class)

    @property
    def triangle_points(self) -> np.ndarray:
        return self.vertices[self.triangles]

    @property
    def areas(self) -> np.ndarray:
        return triangle_areas(self.triangle_points)

    @property
    def area(self) -> float:
        return float(np.sum(self.areas))


def _finalize(vertices, triangles, spacing) -> InterfaceMesh:
    """Derive edges, adjacency and boundary markers from vertices and triangles."""
    n_tri = len(triangles)
    local = triangles[:, [[1, 2], [2, 0], [0, 1]]].reshape(-1, 2)
    edges, inverse = np.unique(np.sort(local, axis=1), axis=0, return_inverse=True)
    inverse = np.asarray(inverse).reshape(-1)
    triangle_edges = inverse.reshape(n_tri, 3)

    owner = np.repeat(np.arange(n_tri), 3)
    order = np.argsort(inverse, kind="stable")
    counts = np.bincount(inverse, minlength=len(edges))
    if np.any(counts > 2):
        raise GeometryError("Non-manifold triangulation: an edge has more than two triangles")
    starts = np.cumsum(counts) - counts
    edge_triangles = np.full((len(edges), 2), -1, dtype=int)
    edge_triangles[:, 0] = owner[order[starts]]
    shared = counts == 2
    edge_triangles[shared, 1] = owner[order[starts[shared] + 1]]

    boundary = np.zeros(len(vertices), dtype=bool)
    boundary[edges[~shared].ravel()] = True

    points = vertices[triangles]
    if np.any(triangle_areas(points) <= 0.0):
        raise GeometryError("Triangles must be counterclockwise with positive area")
    return InterfaceMesh(
        vertices=vertices,
        triangles=triangles,
        edges=edges,
        edge_triangles=edge_triangles,
        triangle_edges=triangle_edges,
        boundary_vertices=boundary,
        h=float(np.max(triangle_diameters(points))),
        grid_spacing=float(spacing),
    )


def _grid_triangles(n_x, n_y, keep=None):
    """Two counterclockwise triangles per grid square, split lower-left to upper-right."""
    i, j = np.meshgrid(np.arange(n_x), np.arange(n_y), indexing="xy")
    i, j = i.ravel(), j.ravel()
    if keep is not None:
        mask = keep(i, j)
        i, j = i[mask], j[mask]
    v00 = j * (n_x + 1) + i
    v10 = v00 + 1
    v01 = v00 + n_x + 1
    v11 = v01 + 1
    lower = np.stack([v00, v10, v11], axis=1)
    upper = np.stack([v00, v11, v01], axis=1)
    return np.stack([lower, upper], axis=1).reshape(-1, 3)


def _grid_vertices(xmin, xmax, ymin, ymax, n):
    xs = np.linspace(xmin, xmax, n + 1)
    ys = np.linspace(ymin, ymax, n + 1)
    gx, gy = np.meshgrid(xs, ys, indexing="xy")
    return np.column_stack([gx.ravel(), gy.ravel()])


def build_uniform_square_mesh(xmin, xmax, ymin, ymax, n: int) -> InterfaceMesh:
    """Split [xmin, xmax] x [ymin, ymax] into n^2 squares and each square into two right triangles."""
    if int(n) != n or n < 2:
        raise InvalidArgumentError(f"Need at least 2 cells per side, got {n}")
    if not (xmax > xmin and ymax > ymin):
        raise InvalidArgumentError(f"Empty rectangle [{xmin}, {xmax}] x [{ymin}, {ymax}]")
    n = int(n)
    mesh = _finalize(_grid_vertices(xmin, xmax, ymin, ymax, n), _grid_triangles(n, n), (xmax - xmin) / n)
    LOG.debug(f"Square mesh n={n}: {mesh.n_vertices} vertices, {mesh.n_triangles} triangles, h={mesh.h:.4g}")
    return mesh


def build_square_ring_mesh(outer_half, inner_half, n: int) -> InterfaceMesh:
    """Uniform mesh of [-outer, outer]^2 with the open square (-inner, inner)^2 removed.

    Args:
        outer_half (float): Half width of the outer square.
        inner_half (float): Half width of the hole; must sit on grid lines.
        n (int): Cells per side across the outer square.
    """
    if int(n) != n or n < 2:
        raise InvalidArgumentError(f"Need at least 2 cells per side, got {n}")
    if not 0.0 < inner_half < outer_half:
        raise InvalidArgumentError(f"Hole half width {inner_half} must lie in (0, {outer_half})")
    n = int(n)
    spacing = 2.0 * outer_half / n
    offset = (outer_half - inner_half) / spacing
    if abs(offset - round(offset)) > 1e-9:
        raise InvalidArgumentError(
            f"Hole boundary at +-{inner_half} is not on the grid lines of spacing {spacing:.6g} (n={n})"
        )
    first = int(round(offset))
    last = n - first

    def keep(i, j):
        return ~((i >= first) & (i < last) & (j >= first) & (j < last))

    triangles = _grid_triangles(n, n, keep)
    vertices = _grid_vertices(-outer_half, outer_half, -outer_half, outer_half, n)
    used = np.unique(triangles)
    renumber = np.full(len(vertices), -1, dtype=int)
    renumber[used] = np.arange(len(used))
    mesh = _finalize(vertices[used], renumber[triangles], spacing)
    LOG.debug(f"Ring mesh n={n}: {mesh.n_vertices} vertices, {mesh.n_triangles} triangles, h={mesh.h:.4g}")
    return mesh


def edge_intersection(p0, p1, level_set: LevelSet) -> np.ndarray:
    """Point where the level set changes sign on the segment p0-p1."""
    p0 = np.asarray(p0, dtype=float)
    p1 = np.asarray(p1, dtype=float)
    direction = p1 - p0

    def along(t):
        point = p0 + t * direction
        return float(level_set(point[0], point[1]))

    g0, g1 = along(0.0), along(1.0)
    if not g0 * g1 < 0.0:
        raise InvalidArgumentError(f"No sign change of the level set between {p0.tolist()} and {p1.tolist()}")
    t = bisect(along, 0.0, 1.0, xtol=1e-15, maxiter=MAX_BISECTIONS, disp=False)
    # one secant step across a small bracket around the bisection root
    delta = 1e-7
    ta, tb = max(0.0, t - delta), min(1.0, t + delta)
    ga, gb = along(ta), along(tb)
    if gb != ga:
        ts = ta - ga * (tb - ta) / (gb - ga)
        if 0.0 <= ts <= 1.0 and abs(along(ts)) < abs(along(t)):
            t = ts
    return p0 + t * direction


def _vertex_signs(values, tolerance):
    signs = np.sign(values).astype(np.int8)
    signs[np.abs(values) < tolerance] = 0
    return signs


def _check_single_crossings(mesh: InterfaceMesh, level_set: LevelSet, signs, tolerance):
    p0 = mesh.vertices[mesh.edges[:, 0]]
    p1 = mesh.vertices[mesh.edges[:, 1]]
    samples = p0[:, None, :] + EDGE_SAMPLES[None, :, None] * (p1 - p0)[:, None, :]
    sample_signs = _vertex_signs(level_set.at(samples), tolerance)
    s0 = signs[mesh.edges[:, 0]]
    s1 = signs[mesh.edges[:, 1]]

    same = (s0 == s1) & (s0 != 0)
    flipped = same & np.any(sample_signs * s0[:, None] < 0, axis=1)
    for edge in np.flatnonzero(s0 * s1 < 0):
        sequence = [s for s in (s0[edge], *sample_signs[edge], s1[edge]) if s != 0]
        if np.count_nonzero(np.diff(sequence)) > 1:
            flipped[edge] = True
    bad = np.flatnonzero(flipped)
    if len(bad):
        raise MeshTooCoarseError(int(bad[0]), mesh.edges[bad[0]])


def make_split(parent, points, keys, signs, edge_ids, edge_cuts) -> ElementSplit:
    """Cut geometry of one interface element.

    Args:
        parent (int): Triangle index.
        points (np.ndarray): The three vertex coordinates, counterclockwise.
        keys (sequence): Global vertex indices of the three vertices.
        signs (sequence): Snapped level-set signs of the three vertices.
        edge_ids (sequence): Global edge index opposite each local vertex.
        edge_cuts (dict): Interface crossing point per crossed edge.
    """
    minus, plus, minus_keys, plus_keys = [], [], [], []
    cuts, cut_keys = [], []
    for k in range(3):
        nxt = (k + 1) % 3
        if signs[k] < 0:
            minus.append(points[k])
            minus_keys.append(int(keys[k]))
        elif signs[k] > 0:
            plus.append(points[k])
            plus_keys.append(int(keys[k]))
        else:
            for polygon, polygon_keys in ((minus, minus_keys), (plus, plus_keys)):
                polygon.append(points[k])
                polygon_keys.append(int(keys[k]))
            cuts.append(points[k])
            cut_keys.append(int(keys[k]))
        if signs[k] * signs[nxt] < 0:
            edge = int(edge_ids[(k + 2) % 3])
            z = edge_cuts[edge]
            for polygon, polygon_keys in ((minus, minus_keys), (plus, plus_keys)):
                polygon.append(z)
                polygon_keys.append(-(edge + 1))
            cuts.append(z)
            cut_keys.append(-(edge + 1))
    if len(cuts) != 2:
        raise GeometryError(f"Element {parent} has {len(cuts)} interface points, expected 2")

    cut_points = np.array(cuts, dtype=float)
    minus_polygon = np.array(minus, dtype=float)
    plus_polygon = np.array(plus, dtype=float)
    tangent = cut_points[1] - cut_points[0]
    length = np.linalg.norm(tangent)
    if length == 0.0:
        raise GeometryError(f"Element {parent} has coincident interface points")
    normal = np.array([tangent[1], -tangent[0]]) / length
    if np.dot(normal, minus_polygon.mean(axis=0) - cut_points[0]) > 0.0:
        normal = -normal

    parent_area = float(triangle_areas(np.asarray(points)))
    minus_area, plus_area = polygon_area(minus_polygon), polygon_area(plus_polygon)
    if minus_area <= 0.0 or plus_area <= 0.0 or abs(minus_area + plus_area - parent_area) > 1e-10 * parent_area:
        raise GeometryError(
            f"Element {parent} split areas {minus_area:.3e} + {plus_area:.3e} do not match {parent_area:.3e}"
        )
    return ElementSplit(
        parent=int(parent),
        cut_points=cut_points,
        minus_polygon=minus_polygon,
        plus_polygon=plus_polygon,
        segment_normal=normal,
        minus_keys=tuple(minus_keys),
        plus_keys=tuple(plus_keys),
        cut_keys=(cut_keys[0], cut_keys[1]),
        vertex_sides=np.where(np.asarray(signs) < 0, -1, 1),
    )


def _split_for(mesh: InterfaceMesh, element: int, signs, edge_cuts) -> ElementSplit:
    tri = mesh.triangles[element]
    return make_split(element, mesh.vertices[tri], tri, signs[tri], mesh.triangle_edges[element], edge_cuts)


def perturb_split(mesh: InterfaceMesh, split: ElementSplit, amount: float) -> ElementSplit:
    """Re-cut an element with its edge crossing points pulled toward the edge midpoints."""
    moved = {}
    for key, point in zip(split.cut_keys, split.cut_points):
        if key < 0:
            edge = -key - 1
            midpoint = mesh.vertices[mesh.edges[edge]].mean(axis=0)
            moved[edge] = point + amount * (midpoint - point)
    return _split_for(mesh, split.parent, mesh.vertex_sign, {**mesh.edge_cuts, **moved})


def classify(mesh: InterfaceMesh, level_set: LevelSet) -> InterfaceMesh:
    """Tag elements and edges against the interface and cut every interface element.

    Vertices with |phi| below the snapping tolerance are treated as lying on the interface;
    an element touched by the interface only at vertices stays regular.
    """
    tolerance = SNAP_TOLERANCE * mesh.h
    signs = _vertex_signs(level_set.at(mesh.vertices), tolerance)
    _check_single_crossings(mesh, level_set, signs, tolerance)

    tri_signs = signs[mesh.triangles]
    has_minus = np.any(tri_signs < 0, axis=1)
    has_plus = np.any(tri_signs > 0, axis=1)
    element_class = np.where(
        has_minus & has_plus, INTERFACE, np.where(has_minus, REGULAR_MINUS, REGULAR_PLUS)
    ).astype(np.int8)

    crossed = signs[mesh.edges[:, 0]] * signs[mesh.edges[:, 1]] < 0
    edge_cuts = {
        int(e): edge_intersection(mesh.vertices[mesh.edges[e, 0]], mesh.vertices[mesh.edges[e, 1]], level_set)
        for e in np.flatnonzero(crossed)
    }
    edge_class = crossed & (mesh.edge_triangles[:, 1] >= 0)

    splits = {int(t): _split_for(mesh, int(t), signs, edge_cuts) for t in np.flatnonzero(element_class == INTERFACE)}
    LOG.debug(
        f"Classified against {level_set.name}: {len(splits)} interface elements, "
        f"{int(np.count_nonzero(edge_class))} interface edges"
    )
    return replace(
        mesh,
        level_set=level_set,
        vertex_sign=signs,
        element_class=element_class,
        edge_class=edge_class,
        edge_cuts=edge_cuts,
        splits=splits,
    )


def write_mesh(mesh: InterfaceMesh, path) -> Path:
    """Plain-text dump: ``v x y`` per vertex, ``t i j k class`` per triangle (0-based)."""
    path = Path(path)
    classes = mesh.element_class if mesh.element_class is not None else np.full(mesh.n_triangles, REGULAR_PLUS)
    with path.open("w", encoding="utf-8", newline="\n") as handle:
        for x, y in mesh.vertices:
            handle.write(f"v {x:.17g} {y:.17g}\n")
        for (i, j, k), tag in zip(mesh.triangles, classes):
            handle.write(f"t {i} {j} {k} {CLASS_NAMES[int(tag)]}\n")
    LOG.info(f"Mesh written to {path}")
    return path
