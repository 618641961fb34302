# pylint: disable=missing-function-docstring,missing-class-docstring,missing-module-docstring
import math
import unittest

import numpy as np
import pytest

from ife_lab.solver.logic.benchmarks import cardioid_level_set
from ife_lab.solver.logic.errors import InvalidArgumentError, MeshTooCoarseError
from ife_lab.solver.logic.mesh import (
    INTERFACE,
    REGULAR_MINUS,
    REGULAR_PLUS,
    LevelSet,
    build_square_ring_mesh,
    build_uniform_square_mesh,
    classify,
    edge_intersection,
    write_mesh,
)

R0 = math.pi / 6
CIRCLE = LevelSet(lambda x, y: np.asarray(x) ** 2 + np.asarray(y) ** 2 - R0**2, name="circle")


class TestUniformSquareMesh(unittest.TestCase):
    def test_counts_n2(self):
        mesh = build_uniform_square_mesh(-1, 1, -1, 1, 2)
        self.assertEqual(mesh.n_triangles, 8)
        self.assertEqual(mesh.n_vertices, 9)
        self.assertEqual(len(mesh.edges), 16)
        self.assertEqual(int(np.count_nonzero(~mesh.interior_edges)), 8)

    def test_area_conservation(self):
        mesh = build_uniform_square_mesh(-1, 1, -1, 1, 3)
        self.assertEqual(mesh.n_triangles, 18)
        self.assertAlmostEqual(mesh.area, 4.0, delta=1e-12)

    def test_orientation_and_sizes(self):
        mesh = build_uniform_square_mesh(-1, 1, -1, 1, 16)
        self.assertTrue(np.all(mesh.areas > 0.0))
        self.assertAlmostEqual(mesh.grid_spacing, 0.125)
        self.assertAlmostEqual(mesh.h, math.sqrt(2) * 0.125, delta=1e-14)

    def test_boundary_flags(self):
        mesh = build_uniform_square_mesh(-1, 1, -1, 1, 4)
        on_boundary = np.isclose(np.abs(mesh.vertices).max(axis=1), 1.0)
        np.testing.assert_array_equal(mesh.boundary_vertices, on_boundary)

    def test_edge_adjacency(self):
        mesh = build_uniform_square_mesh(0, 1, 0, 1, 5)
        interior = mesh.edge_triangles[mesh.interior_edges]
        self.assertTrue(np.all(interior[:, 0] < interior[:, 1]))
        for t, edges in enumerate(mesh.triangle_edges):
            for k, edge in enumerate(edges):
                self.assertIn(t, mesh.edge_triangles[edge])
                self.assertNotIn(mesh.triangles[t, k], mesh.edges[edge])

    def test_too_few_cells(self):
        with self.assertRaises(InvalidArgumentError):
            build_uniform_square_mesh(-1, 1, -1, 1, 1)
        with pytest.raises(ValueError):
            build_uniform_square_mesh(-1, 1, -1, 1, 0)


class TestSquareRingMesh(unittest.TestCase):
    def test_counts_n8(self):
        mesh = build_square_ring_mesh(2.0, 0.5, 8)
        self.assertEqual(mesh.n_triangles, 120)
        self.assertEqual(mesh.n_vertices, 80)
        self.assertEqual(int(np.count_nonzero(mesh.boundary_vertices)), 32 + 8)

    def test_area_n16(self):
        mesh = build_square_ring_mesh(2.0, 0.5, 16)
        self.assertAlmostEqual(mesh.area, 15.0, delta=1e-12)

    def test_hole_boundary_is_dirichlet(self):
        mesh = build_square_ring_mesh(2.0, 0.5, 16)
        hole = np.isclose(np.abs(mesh.vertices).max(axis=1), 0.5)
        self.assertTrue(np.all(mesh.boundary_vertices[hole]))
        self.assertTrue(np.all(np.abs(mesh.vertices).max(axis=1) >= 0.5 - 1e-12))

    def test_misaligned_hole(self):
        with self.assertRaises(InvalidArgumentError):
            build_square_ring_mesh(2.0, 0.5, 10)


class TestEdgeIntersection(unittest.TestCase):
    def test_linear_root(self):
        z = edge_intersection((0, 0), (1, 0), LevelSet(lambda x, y: x - 0.5))
        np.testing.assert_allclose(z, [0.5, 0.0], atol=1e-14)

    def test_circle_root(self):
        z = edge_intersection((0, 0), (1, 0), CIRCLE)
        np.testing.assert_allclose(z, [R0, 0.0], atol=1e-12)

    def test_cardioid_root_against_scan(self):
        level_set = LevelSet(cardioid_level_set)
        z = edge_intersection((0.2, 0.0), (0.2, 0.5), level_set)
        self.assertAlmostEqual(z[0], 0.2, delta=1e-15)
        self.assertLess(abs(level_set(*z)), 1e-12)
        below = level_set(0.2, z[1] - 1e-12)
        above = level_set(0.2, z[1] + 1e-12)
        self.assertLess(below * above, 0.0)

    def test_no_sign_change(self):
        with self.assertRaises(InvalidArgumentError):
            edge_intersection((0, 0), (1, 0), LevelSet(lambda x, y: x + 1.0))


class TestClassify(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.mesh = classify(build_uniform_square_mesh(-1, 1, -1, 1, 16), CIRCLE)

    def test_regular_tags_follow_vertex_signs(self):
        signs = self.mesh.vertex_sign[self.mesh.triangles]
        plus = np.all(signs >= 0, axis=1)
        minus = np.all(signs <= 0, axis=1) & np.any(signs < 0, axis=1)
        np.testing.assert_array_equal(self.mesh.element_class[plus], REGULAR_PLUS)
        np.testing.assert_array_equal(self.mesh.element_class[minus], REGULAR_MINUS)
        self.assertEqual(len(self.mesh.splits), int(np.count_nonzero(self.mesh.element_class == INTERFACE)))

    def test_split_consistency(self):
        for t, split in self.mesh.splits.items():
            parent_area = self.mesh.areas[t]
            self.assertGreater(split.minus_area, 0.0)
            self.assertGreater(split.plus_area, 0.0)
            self.assertAlmostEqual(split.minus_area + split.plus_area, parent_area, delta=1e-12 * parent_area)
            self.assertTrue(np.all(np.abs(CIRCLE.at(split.cut_points)) <= 1e-12))
            toward_minus = split.minus_polygon.mean(axis=0) - split.cut_points[0]
            self.assertLess(np.dot(split.segment_normal, toward_minus), 0.0)
            self.assertAlmostEqual(np.linalg.norm(split.segment_normal), 1.0, delta=1e-14)

    def test_interface_edges_are_interior_crossings(self):
        edges = self.mesh.interface_edges
        self.assertTrue(np.all(self.mesh.interior_edges[edges]))
        signs = self.mesh.vertex_sign[self.mesh.edges[edges]]
        self.assertTrue(np.all(signs[:, 0] * signs[:, 1] < 0))

    def test_interface_elements_near_interface(self):
        for t in self.mesh.interface_elements:
            p = self.mesh.vertices[self.mesh.triangles[t]]
            # circumcenter of a right triangle is the midpoint of its hypotenuse
            lengths = [np.linalg.norm(p[i] - p[(i + 1) % 3]) for i in range(3)]
            k = int(np.argmax(lengths))
            center = 0.5 * (p[k] + p[(k + 1) % 3])
            self.assertLessEqual(abs(np.linalg.norm(center) - R0), 2 * self.mesh.h)

    def test_interface_count_scales_like_inverse_h(self):
        finer = classify(build_uniform_square_mesh(-1, 1, -1, 1, 32), CIRCLE)
        ratio = len(finer.splits) / len(self.mesh.splits)
        self.assertGreaterEqual(ratio, 1.6)
        self.assertLessEqual(ratio, 2.4)

    def test_vertical_line_strip(self):
        mesh = classify(build_uniform_square_mesh(0, 1, 0, 1, 4), LevelSet(lambda x, y: np.asarray(x) - 0.3))
        self.assertEqual(len(mesh.splits), 8)
        for t, split in mesh.splits.items():
            np.testing.assert_allclose(split.cut_points[:, 0], 0.3, atol=1e-12)
            self.assertTrue(np.all(mesh.vertices[mesh.triangles[t], 0] >= 0.25))
            self.assertTrue(np.all(mesh.vertices[mesh.triangles[t], 0] <= 0.5))
        # three horizontal interior edges and four diagonals
        self.assertEqual(len(mesh.interface_edges), 7)

    def test_vertex_contact_only_stays_regular(self):
        mesh = classify(build_uniform_square_mesh(0, 1, 0, 1, 4), LevelSet(lambda x, y: np.asarray(x) - 0.25))
        self.assertEqual(len(mesh.splits), 0)
        self.assertTrue(np.all(mesh.vertex_sign[np.isclose(mesh.vertices[:, 0], 0.25)] == 0))

    def test_double_crossing_is_rejected(self):
        bubble = LevelSet(lambda x, y: (np.asarray(x) - 0.25) ** 2 + np.asarray(y) ** 2 - 0.01)
        with self.assertRaises(MeshTooCoarseError) as ctx:
            classify(build_uniform_square_mesh(0, 1, 0, 1, 2), bubble)
        self.assertIn("edge", str(ctx.exception))

    def test_cardioid_cusp_is_tolerated(self):
        mesh = classify(build_uniform_square_mesh(-1, 1, -1, 1, 16), LevelSet(cardioid_level_set))
        origin = int(np.flatnonzero(np.all(np.isclose(mesh.vertices, 0.0), axis=1))[0])
        self.assertEqual(mesh.vertex_sign[origin], 0)
        self.assertGreater(len(mesh.splits), 0)
        for split in mesh.splits.values():
            self.assertGreater(split.minus_area, 0.0)
            self.assertGreater(split.plus_area, 0.0)


def test_write_mesh(tmp_path):
    mesh = classify(build_uniform_square_mesh(-1, 1, -1, 1, 4), CIRCLE)
    path = write_mesh(mesh, tmp_path / "mesh.txt")
    lines = path.read_text(encoding="utf-8").splitlines()
    assert len(lines) == mesh.n_vertices + mesh.n_triangles
    assert lines[0].startswith("v ")
    tags = {line.split()[-1] for line in lines if line.startswith("t ")}
    assert tags <= {"regular-", "regular+", "interface"}
    assert "interface" in tags
