"""Linear solvers for the assembled systems.

The symmetric form goes to preconditioned conjugate gradients, the others to BiCGSTAB.
A Krylov method that does not reach its tolerance hands over to a sparse direct solve.
"""

from abc import ABC, abstractmethod

import numpy as np
from ovos_utils.log import LOG
from scipy import sparse
from scipy.linalg import lu_factor, lu_solve
from scipy.sparse.linalg import LinearOperator, bicgstab, cg, spilu, spsolve

from ife_lab.solver.logic.errors import InvalidArgumentError, SolverError

DENSE_LIMIT = 3000


class LinearSolver(ABC):
    """Solve A x = b for a square sparse matrix."""

    name = "linear solver"

    @abstractmethod
    def solve(self, matrix, rhs) -> np.ndarray:
        """Return x with A x = b.

        Args:
            matrix (scipy.sparse.spmatrix): System matrix.
            rhs (np.ndarray): Right-hand side.
        """
        raise NotImplementedError


class DirectSolver(LinearSolver):
    """Sparse LU."""

    name = "sparse LU"

    def solve(self, matrix, rhs) -> np.ndarray:
        x = spsolve(sparse.csc_matrix(matrix), np.asarray(rhs, dtype=float))
        if not np.all(np.isfinite(x)):
            raise SolverError(f"{self.name} returned non-finite values; the matrix is singular")
        return x


class DenseSolver(LinearSolver):
    """Dense LU for small debugging runs."""

    name = "dense LU"

    def solve(self, matrix, rhs) -> np.ndarray:
        if matrix.shape[0] > DENSE_LIMIT:
            raise InvalidArgumentError(f"Dense solves are limited to {DENSE_LIMIT} dofs, got {matrix.shape[0]}")
        dense = matrix.toarray() if sparse.issparse(matrix) else np.asarray(matrix)
        return lu_solve(lu_factor(dense), np.asarray(rhs, dtype=float))


class _KrylovSolver(LinearSolver):
    def __init__(self, rtol: float = 1e-12, maxiter=None, fallback: LinearSolver = None):
        self.rtol = rtol
        self.maxiter = maxiter
        self.fallback = fallback or DirectSolver()
        self.iterations = 0

    @abstractmethod
    def preconditioner(self, matrix) -> LinearOperator:
        raise NotImplementedError

    @abstractmethod
    def _iterate(self, matrix, rhs, **kwargs):
        raise NotImplementedError

    def solve(self, matrix, rhs) -> np.ndarray:
        matrix = sparse.csr_matrix(matrix)
        rhs = np.asarray(rhs, dtype=float)
        if not np.any(rhs):
            return np.zeros_like(rhs)
        self.iterations = 0

        def count(_):
            self.iterations += 1

        try:
            M = self.preconditioner(matrix)
        except RuntimeError as exc:
            LOG.warning(f"{self.name}: preconditioner setup failed ({exc}), solving without it")
            M = None
        x, info = self._iterate(
            matrix,
            rhs,
            rtol=self.rtol,
            atol=0.0,
            maxiter=self.maxiter or 10 * matrix.shape[0],
            M=M,
            callback=count,
        )
        if info != 0 or not np.all(np.isfinite(x)):
            LOG.warning(
                f"{self.name} stopped with info={info} after {self.iterations} iterations, using {self.fallback.name}"
            )
            return self.fallback.solve(matrix, rhs)
        LOG.debug(f"{self.name} converged in {self.iterations} iterations")
        return x


class ConjugateGradientSolver(_KrylovSolver):
    """CG with a Jacobi preconditioner; for symmetric positive definite systems."""

    name = "conjugate gradient"

    def preconditioner(self, matrix) -> LinearOperator:
        diagonal = matrix.diagonal()
        if np.any(diagonal <= 0.0):
            raise RuntimeError("non-positive diagonal")
        inverse = 1.0 / diagonal
        return LinearOperator(matrix.shape, matvec=lambda v: inverse * np.ravel(v))

    def _iterate(self, matrix, rhs, **kwargs):
        return cg(matrix, rhs, **kwargs)


class BiCgStabSolver(_KrylovSolver):
    """BiCGSTAB with an incomplete LU preconditioner."""

    name = "BiCGSTAB"

    def preconditioner(self, matrix) -> LinearOperator:
        factor = spilu(sparse.csc_matrix(matrix), drop_tol=1e-5, fill_factor=10)
        return LinearOperator(matrix.shape, matvec=factor.solve)

    def _iterate(self, matrix, rhs, **kwargs):
        return bicgstab(matrix, rhs, **kwargs)


def make_solver(symmetric: bool, dof: int, rtol: float = 1e-12, dense_threshold: int = 0) -> LinearSolver:
    """Pick the solver for a system.

    Args:
        symmetric (bool): Whether the matrix is symmetric (epsilon = -1).
        dof (int): System size.
        rtol (float): Relative residual tolerance of the Krylov methods.
        dense_threshold (int): Use dense LU at or below this size (0 disables, capped at 3000).
    """
    if dense_threshold and dof <= min(dense_threshold, DENSE_LIMIT):
        return DenseSolver()
    if symmetric:
        return ConjugateGradientSolver(rtol=rtol)
    return BiCgStabSolver(rtol=rtol)
