# pylint: disable=missing-function-docstring,missing-class-docstring,missing-module-docstring
import math
import unittest

import numpy as np
from mock import patch

from ife_lab.solver.logic import ife_space
from ife_lab.solver.logic.errors import DegenerateCutError, InvalidArgumentError
from ife_lab.solver.logic.ife_space import build_ife_basis, build_space
from ife_lab.solver.logic.mesh import LevelSet, build_uniform_square_mesh, classify, make_split
from ife_lab.solver.logic.problem import constant

LINE = LevelSet(lambda x, y: np.asarray(x) - 0.3, name="x=0.3")
# one crossing per edge on the 16 x 16 grid of [-1, 1]^2
CIRCLE = LevelSet(lambda x, y: np.asarray(x) ** 2 + np.asarray(y) ** 2 - (math.pi / 6) ** 2, name="circle")
# local edge k is opposite local vertex k
EDGE_VERTICES = {0: (1, 2), 1: (2, 0), 2: (0, 1)}


def _piece_value(basis, side, point):
    return basis.piece(side) @ np.array([1.0, point[0], point[1]])


def _straight_split(points, cuts):
    """Split of one triangle by the line through two edge points; ``cuts`` maps local edge -> parameter."""
    edge_cuts = {}
    for edge, t in cuts.items():
        a, b = EDGE_VERTICES[edge]
        edge_cuts[edge] = points[a] + t * (points[b] - points[a])
    z1, z2 = edge_cuts.values()
    tangent = z2 - z1
    signs = np.sign(tangent[1] * (points[:, 0] - z1[0]) - tangent[0] * (points[:, 1] - z1[1]))
    return make_split(0, points, (0, 1, 2), signs, (0, 1, 2), edge_cuts)


class TestIfeLocalBasis(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.mesh = classify(build_uniform_square_mesh(-1, 1, -1, 1, 16), CIRCLE)
        cls.beta_minus, cls.beta_plus = 1.0, 1000.0
        cls.bases = {
            t: build_ife_basis(split, cls.mesh.vertices[cls.mesh.triangles[t]], cls.beta_minus, cls.beta_plus)
            for t, split in cls.mesh.splits.items()
        }

    def test_nodal_conditions(self):
        for t, basis in self.bases.items():
            points = self.mesh.vertices[self.mesh.triangles[t]]
            for j, (vertex, side) in enumerate(zip(points, basis.split.vertex_sides)):
                np.testing.assert_allclose(_piece_value(basis, side, vertex), np.eye(3)[j], atol=1e-9)

    def test_continuity_across_segment(self):
        for basis in self.bases.values():
            for z in basis.split.cut_points:
                np.testing.assert_allclose(_piece_value(basis, -1, z), _piece_value(basis, 1, z), atol=1e-9)

    def test_flux_continuity(self):
        for basis in self.bases.values():
            normal = basis.split.segment_normal
            flux_minus = self.beta_minus * basis.piece(-1)[:, 1:] @ normal
            flux_plus = self.beta_plus * basis.piece(1)[:, 1:] @ normal
            np.testing.assert_allclose(flux_minus, flux_plus, atol=1e-8 * self.beta_plus)

    def test_partition_of_unity(self):
        for basis in self.bases.values():
            for side in (-1, 1):
                np.testing.assert_allclose(basis.piece(side).sum(axis=0), [1.0, 0.0, 0.0], atol=1e-9)

    def test_equal_coefficients_give_p1(self):
        space = build_space(self.mesh, constant(2.0), constant(2.0))
        for t in space.local:
            np.testing.assert_allclose(space.pieces[0, t], space.p1[t], atol=1e-10)
            np.testing.assert_allclose(space.pieces[1, t], space.p1[t], atol=1e-10)

    def test_rejects_non_positive_beta(self):
        t, split = next(iter(self.mesh.splits.items()))
        with self.assertRaises(InvalidArgumentError):
            build_ife_basis(split, self.mesh.vertices[self.mesh.triangles[t]], 0.0, 1.0)


class TestFemSpace(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.mesh = classify(build_uniform_square_mesh(0, 1, 0, 1, 4), LINE)
        cls.space = build_space(cls.mesh, constant(1.0), constant(10.0))

        def u_exact(x, y):
            x = np.asarray(x, dtype=float)
            return np.where(x < 0.3, x - 0.3, (x - 0.3) / 10.0) + 0.0 * np.asarray(y)

        cls.u_exact = staticmethod(u_exact)
        cls.u_h = cls.space.interpolate(u_exact)

    def test_dofs_and_boundary(self):
        self.assertEqual(self.space.dof, 25)
        self.assertEqual(len(self.space.boundary_dofs), 16)
        self.assertEqual(len(self.space.local), 8)

    def test_reproduces_piecewise_linear_solution(self):
        for t in range(self.mesh.n_triangles):
            for side in (-1, 1):
                if self.space.is_interface(t):
                    point = self.space.split(t).polygon(side).mean(axis=0)
                elif self.mesh.element_class[t] != side:
                    continue
                else:
                    point = self.mesh.vertices[self.mesh.triangles[t]].mean(axis=0)
                values, gradient = self.space.evaluate(self.u_h, t, side, point[None, :])
                self.assertAlmostEqual(float(values[0]), float(self.u_exact(point[0], point[1])), delta=1e-10)
                np.testing.assert_allclose(gradient, [1.0 if side < 0 else 0.1, 0.0], atol=1e-10)

    def test_gradients_per_piece(self):
        grad_minus, grad_plus = self.space.gradients(self.u_h)
        interface = list(self.space.local)
        np.testing.assert_allclose(grad_minus[interface], [[1.0, 0.0]] * len(interface), atol=1e-11)
        np.testing.assert_allclose(grad_plus[interface], [[0.1, 0.0]] * len(interface), atol=1e-11)

    def test_eval_basis_sums_to_one(self):
        t = next(iter(self.space.local))
        point = self.space.split(t).segment_midpoint
        values, grads = self.space.eval_basis(t, point)
        self.assertAlmostEqual(float(values.sum()), 1.0, delta=1e-12)
        np.testing.assert_allclose(grads.sum(axis=0), 0.0, atol=1e-11)

    def test_eval_basis_outside_element(self):
        with self.assertRaises(InvalidArgumentError):
            self.space.eval_basis(0, [0.9, 0.9])
        with self.assertRaises(InvalidArgumentError):
            self.space.eval_basis(self.mesh.n_triangles, [0.1, 0.1])

    def test_sides_of_regular_elements_follow_tags(self):
        for t in range(self.mesh.n_triangles):
            if not self.space.is_interface(t):
                sides = self.space.sides_of(t, self.mesh.vertices[self.mesh.triangles[t]])
                self.assertTrue(np.all(sides == self.mesh.element_class[t]))

    def test_unclassified_mesh(self):
        with self.assertRaises(InvalidArgumentError):
            build_space(build_uniform_square_mesh(0, 1, 0, 1, 4), constant(1.0), constant(1.0))


def test_degenerate_cut_is_retried_with_perturbation():
    mesh = classify(build_uniform_square_mesh(0, 1, 0, 1, 4), LINE)
    real = ife_space.build_ife_basis
    failed = []

    def flaky(split, points, beta_minus, beta_plus):
        if not failed:
            failed.append(split.parent)
            raise DegenerateCutError(split.parent, 1e-14)
        return real(split, points, beta_minus, beta_plus)

    with patch("ife_lab.solver.logic.ife_space.build_ife_basis", side_effect=flaky), patch(
        "ife_lab.solver.logic.ife_space.LOG"
    ) as log:
        space = build_space(mesh, constant(1.0), constant(10.0))
    assert len(space.local) == len(mesh.splits)
    log.warning.assert_called_once()
    moved = space.split(failed[0]).cut_points
    original = mesh.splits[failed[0]].cut_points
    assert not np.allclose(moved, original, atol=1e-12, rtol=0.0)
    assert np.allclose(moved, original, atol=1e-5, rtol=0.0)


class TestStraightCutBasis(unittest.TestCase):
    def test_right_triangle_cut_at_half(self):
        # cut by x = 0.5: z4 = (0.5, 0), z5 = (0.5, 0.5); beta- = 1 for x < 0.5, beta+ = 2
        points = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
        split = _straight_split(points, {2: 0.5, 0: 0.5})
        np.testing.assert_array_equal(split.vertex_sides, [-1, 1, -1])
        np.testing.assert_allclose(split.cut_points, [[0.5, 0.0], [0.5, 0.5]])
        basis = build_ife_basis(split, points, 1.0, 2.0)
        # the function of vertex (1, 0): slope 4/3 on T^-, 2/3 on T^+ along y = 0
        np.testing.assert_allclose(basis.piece(-1)[1], [0.0, 4.0 / 3.0, 0.0], atol=1e-13)
        np.testing.assert_allclose(basis.piece(1)[1], [1.0 / 3.0, 2.0 / 3.0, 0.0], atol=1e-13)
        np.testing.assert_allclose(_piece_value(basis, 1, [1.0, 0.0])[1], 1.0, atol=1e-13)
        np.testing.assert_allclose(
            _piece_value(basis, -1, [0.5, 0.0])[1], _piece_value(basis, 1, [0.5, 0.0])[1], atol=1e-13
        )

    def test_random_cuts_satisfy_the_jump_conditions(self):
        rng = np.random.default_rng(2024)
        reference = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
        for _ in range(1000):
            size = 10.0 ** rng.uniform(-2.0, 0.0)
            points = size * (reference + rng.uniform(-0.2, 0.2, size=(3, 2))) + rng.uniform(-1.0, 1.0, size=2)
            edges = rng.choice(3, size=2, replace=False)
            split = _straight_split(points, {int(edge): rng.uniform(0.1, 0.9) for edge in edges})
            beta_minus = 10.0 ** rng.uniform(-1.5, 1.5)
            beta_plus = beta_minus * 10.0 ** rng.uniform(-3.0, 3.0)
            basis = build_ife_basis(split, points, beta_minus, beta_plus)

            for j, (vertex, side) in enumerate(zip(points, split.vertex_sides)):
                np.testing.assert_allclose(_piece_value(basis, side, vertex), np.eye(3)[j], atol=1e-9)
            for z in split.cut_points:
                np.testing.assert_allclose(_piece_value(basis, -1, z), _piece_value(basis, 1, z), atol=1e-9)
            normal = split.segment_normal
            flux_minus = beta_minus * basis.piece(-1)[:, 1:] @ normal
            flux_plus = beta_plus * basis.piece(1)[:, 1:] @ normal
            np.testing.assert_allclose(flux_minus, flux_plus, atol=1e-9 * max(beta_minus, beta_plus) / size)
