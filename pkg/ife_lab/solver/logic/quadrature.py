"""Symmetric Gaussian rules on triangles, split elements and segments."""

from typing import NamedTuple, Tuple

import numpy as np

from ife_lab.solver.logic.errors import InvalidArgumentError
from ife_lab.solver.logic.mesh import ElementSplit
from ife_lab.solver.logic.utils import fan_triangles, triangle_areas


class QuadratureRule(NamedTuple):
    points: np.ndarray
    weights: np.ndarray

    def integrate(self, values) -> float:
        return float(np.dot(self.weights, values))


def _orbit3(a, weight):
    """The three permutations of (a, a, 1 - 2a)."""
    b = 1.0 - 2.0 * a
    return [(b, a, a), (a, b, a), (a, a, b)], [weight] * 3


def _orbit6(a, b, weight):
    c = 1.0 - a - b
    return [(a, b, c), (a, c, b), (b, a, c), (b, c, a), (c, a, b), (c, b, a)], [weight] * 6


def _build_rule(*orbits):
    bary, weights = [], []
    for points, w in orbits:
        bary.extend(points)
        weights.extend(w)
    return np.array(bary, dtype=float), np.array(weights, dtype=float)


# Dunavant rules, weights normalised to sum to one
_RULES = {
    2: _build_rule(_orbit3(1.0 / 6.0, 1.0 / 3.0)),
    4: _build_rule(
        _orbit3(0.44594849091596488632, 0.22338158967801146570),
        _orbit3(0.09157621350977074346, 0.10995174365532186764),
    ),
    6: _build_rule(
        _orbit3(0.249286745170910, 0.116786275726379),
        _orbit3(0.063089014491502, 0.050844906370207),
        _orbit6(0.053145049844817, 0.310352451033784, 0.082851075618374),
    ),
}
SUPPORTED_DEGREES = tuple(sorted(_RULES))


def reference_rule(degree: int) -> Tuple[np.ndarray, np.ndarray]:
    """Barycentric points (q, 3) and unit-sum weights (q,) of the rule of the given degree."""
    try:
        return _RULES[degree]
    except KeyError as exc:
        raise InvalidArgumentError(f"Unsupported quadrature degree {degree}; use one of {SUPPORTED_DEGREES}") from exc


def quad_triangle(points, degree: int = 4) -> QuadratureRule:
    """Rule on one triangle, or on a batch of triangles given with shape (..., 3, 2).

    Weights are scaled by the unsigned area so they sum to the triangle area.
    """
    bary, weights = reference_rule(degree)
    p = np.asarray(points, dtype=float)
    area = np.abs(triangle_areas(p))
    nodes = np.einsum("qk,...kd->...qd", bary, p)
    return QuadratureRule(nodes, np.multiply.outer(area, weights))


def quad_polygon(polygon, degree: int = 4) -> QuadratureRule:
    """Fan-triangulate a convex polygon from its first vertex and concatenate the rules."""
    polygon = np.asarray(polygon, dtype=float)
    fans = np.array([polygon[list(tri)] for tri in fan_triangles(polygon)])
    rule = quad_triangle(fans, degree)
    return QuadratureRule(rule.points.reshape(-1, 2), rule.weights.reshape(-1))


def quad_split(split: ElementSplit, degree: int = 4) -> Tuple[QuadratureRule, QuadratureRule]:
    """Rules on the minus and plus parts of an interface element."""
    return quad_polygon(split.minus_polygon, degree), quad_polygon(split.plus_polygon, degree)


_GAUSS_NODES, _GAUSS_WEIGHTS = np.polynomial.legendre.leggauss(4)


def gauss_segment(a, b) -> QuadratureRule:
    """Four-point Gauss-Legendre rule on the segment a-b; weights sum to its length."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    t = 0.5 * (_GAUSS_NODES + 1.0)
    length = float(np.linalg.norm(b - a))
    return QuadratureRule(a + np.outer(t, b - a), 0.5 * length * _GAUSS_WEIGHTS)
