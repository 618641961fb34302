# pylint: disable=missing-function-docstring
"""Small geometric and bookkeeping helpers shared by the solver stages."""

import os
from typing import Optional

import numpy as np


def triangle_areas(points):
    """Signed areas of a batch of triangles.

    Args:
        points (np.ndarray): Vertex coordinates with shape (..., 3, 2).
    """
    p = np.asarray(points, dtype=float)
    e1 = p[..., 1, :] - p[..., 0, :]
    e2 = p[..., 2, :] - p[..., 0, :]
    return 0.5 * (e1[..., 0] * e2[..., 1] - e1[..., 1] * e2[..., 0])


def polygon_area(points) -> float:
    """Shoelace area of a simple polygon given counterclockwise."""
    p = np.asarray(points, dtype=float)
    x, y = p[:, 0], p[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def triangle_diameters(points):
    p = np.asarray(points, dtype=float)
    lengths = [np.linalg.norm(p[..., i, :] - p[..., (i + 1) % 3, :], axis=-1) for i in range(3)]
    return np.max(np.stack(lengths, axis=-1), axis=-1)


def barycentric(triangle, point):
    """Barycentric coordinates of a point with respect to one triangle."""
    t = np.asarray(triangle, dtype=float)
    matrix = np.array([[1.0, 1.0, 1.0], t[:, 0], t[:, 1]])
    return np.linalg.solve(matrix, np.array([1.0, point[0], point[1]]))


def p1_coefficients(points):
    """Coefficients (a, b, c) of the three barycentric functions a + b x + c y.

    Args:
        points (np.ndarray): Triangle vertices with shape (M, 3, 2).

    Returns:
        np.ndarray: Shape (M, 3, 3); entry [t, i] holds (a, b, c) of the i-th local function.
    """
    p = np.asarray(points, dtype=float)
    vandermonde = np.concatenate([np.ones(p.shape[:-1] + (1,)), p], axis=-1)
    # columns of the inverse are the coefficient vectors
    return np.swapaxes(np.linalg.inv(vandermonde), -1, -2)


def fan_triangles(polygon):
    """Split a convex polygon into triangles sharing its first vertex."""
    return [(0, k, k + 1) for k in range(1, len(polygon) - 1)]


def worker_count(default: Optional[int] = None) -> int:
    """Number of worker threads, capped by the IFE_LAB_THREADS environment variable."""
    fallback = default or os.cpu_count() or 1
    raw = os.environ.get("IFE_LAB_THREADS", "")
    try:
        cap = int(raw)
    except ValueError:
        return fallback
    return max(1, min(cap, fallback)) if cap > 0 else fallback
