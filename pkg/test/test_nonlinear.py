# pylint: disable=missing-function-docstring,missing-class-docstring,missing-module-docstring
import unittest
from dataclasses import replace

import numpy as np
from mock import patch
from scipy.sparse.linalg import spsolve

from ife_lab.solver.logic.assembly import assemble, assemble_semilinear
from ife_lab.solver.logic.benchmarks import example_circle, example_nonlinear_ring
from ife_lab.solver.logic.errors import AssemblyError, NewtonConvergenceError
from ife_lab.solver.logic.ife_space import build_space
from ife_lab.solver.logic.mesh import build_square_ring_mesh, build_uniform_square_mesh, classify
from ife_lab.solver.logic.nonlinear import NewtonResult, solve_linear, solve_semilinear
from ife_lab.solver.logic.problem import PenaltyConfig


class TestSolveLinear(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.spec = example_circle()
        mesh = classify(build_uniform_square_mesh(-1, 1, -1, 1, 8), cls.spec.level_set)
        cls.space = build_space(mesh, cls.spec.beta_minus, cls.spec.beta_plus)

    def test_matches_direct_solve(self):
        for epsilon in (-1, 0, 1):
            cfg = PenaltyConfig.for_epsilon(epsilon, self.spec.beta_max)
            system = assemble(self.space, self.spec, cfg)
            result = solve_linear(self.space, self.spec, cfg, system)
            np.testing.assert_allclose(result.u, spsolve(system.matrix.tocsc(), system.load), atol=1e-9)
            self.assertEqual(result.iterations, 0)
            self.assertEqual(result.residual, 0.0)

    def test_dirichlet_values_are_exact(self):
        cfg = PenaltyConfig.for_epsilon(-1, self.spec.beta_max)
        result = solve_linear(self.space, self.spec, cfg, dense_threshold=500)
        boundary = self.space.boundary_dofs
        expected = self.spec.dirichlet(self.space.mesh.vertices[boundary, 0], self.space.mesh.vertices[boundary, 1])
        np.testing.assert_array_equal(result.u[boundary], expected)


class TestSolveSemilinear(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.spec = example_nonlinear_ring()
        mesh = classify(build_square_ring_mesh(2.0, 0.5, 8), cls.spec.level_set)
        cls.space = build_space(mesh, cls.spec.beta_minus, cls.spec.beta_plus)
        cls.cfg = PenaltyConfig.for_epsilon(-1, cls.spec.beta_max)

    def test_newton_converges(self):
        result = solve_semilinear(self.space, self.spec, self.cfg, tol=1e-10)
        self.assertIsInstance(result, NewtonResult)
        self.assertLessEqual(result.iterations, 10)
        self.assertLess(result.residual, 1e-10)
        self.assertEqual(len(result.residual_history), result.iterations + 1)
        residual, _ = assemble_semilinear(self.space, self.spec, self.cfg, result.u)
        self.assertLess(np.max(np.abs(residual)), 1e-10)

    def test_newton_logs_each_iteration(self):
        with patch("ife_lab.solver.logic.nonlinear.LOG") as log:
            result = solve_semilinear(self.space, self.spec, self.cfg)
        self.assertEqual(log.info.call_count, result.iterations + 1)

    def test_zero_iterations_allowed(self):
        with self.assertRaises(NewtonConvergenceError) as ctx:
            solve_semilinear(self.space, self.spec, self.cfg, max_iter=0)
        self.assertEqual(ctx.exception.iterations, 0)
        self.assertGreater(ctx.exception.residual, 0.0)

    def test_linear_problem_is_rejected(self):
        with self.assertRaises(AssemblyError):
            solve_semilinear(self.space, replace(self.spec, nonlinearity=None), self.cfg)
