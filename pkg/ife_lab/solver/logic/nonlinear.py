"""Linear solve and Newton iteration drivers on top of the assembled PPIFE system."""

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from ovos_utils.log import LOG

from ife_lab.solver.logic.assembly import AssembledSystem, assemble, assemble_semilinear
from ife_lab.solver.logic.errors import AssemblyError, NewtonConvergenceError
from ife_lab.solver.logic.ife_space import FemSpace
from ife_lab.solver.logic.linalg import make_solver
from ife_lab.solver.logic.problem import PenaltyConfig, ProblemSpec


@dataclass
class NewtonResult:
    u: np.ndarray
    iterations: int = 0
    residual_history: List[float] = field(default_factory=list)

    @property
    def residual(self) -> float:
        return self.residual_history[-1] if self.residual_history else 0.0


def solve_linear(
    space: FemSpace,
    spec: ProblemSpec,
    cfg: PenaltyConfig,
    system: Optional[AssembledSystem] = None,
    rtol: float = 1e-12,
    dense_threshold: int = 0,
) -> NewtonResult:
    """Assemble (unless given) and solve the linear problem once."""
    system = system or assemble(space, spec, cfg)
    solver = make_solver(system.symmetric, system.dof, rtol=rtol, dense_threshold=dense_threshold)
    u = solver.solve(system.matrix, system.load)
    # the constrained rows are identities, restore the boundary data exactly
    u[system.dirichlet_dofs] = system.dirichlet_values
    return NewtonResult(u=u)


def solve_semilinear(
    space: FemSpace,
    spec: ProblemSpec,
    cfg: PenaltyConfig,
    system: Optional[AssembledSystem] = None,
    tol: float = 1e-10,
    max_iter: int = 25,
    rtol: float = 1e-12,
    dense_threshold: int = 0,
) -> NewtonResult:
    """Newton's method for a_h(u_h, v) + (s(u_h), v) = (f, v) starting from the Dirichlet lift.

    Raises:
        NewtonConvergenceError: When the residual max-norm is still above ``tol`` after
            ``max_iter`` iterations or the iterate stops being finite.
    """
    if spec.nonlinearity is None:
        raise AssemblyError(f"Problem '{spec.name}' has no nonlinear term; use solve_linear")
    system = system or assemble(space, spec, cfg)
    solver = make_solver(system.symmetric, system.dof, rtol=rtol, dense_threshold=dense_threshold)
    result = NewtonResult(u=system.lift())

    residual, jacobian = assemble_semilinear(space, spec, cfg, result.u, system)
    norm = float(np.max(np.abs(residual)))
    result.residual_history.append(norm)
    LOG.info(f"Newton iteration 0: residual {norm:.3e}")
    while norm >= tol:
        if result.iterations >= max_iter or not np.isfinite(norm):
            raise NewtonConvergenceError(result.iterations, norm)
        result.u = result.u - solver.solve(jacobian, residual)
        result.iterations += 1
        residual, jacobian = assemble_semilinear(space, spec, cfg, result.u, system)
        norm = float(np.max(np.abs(residual)))
        result.residual_history.append(norm)
        LOG.info(f"Newton iteration {result.iterations}: residual {norm:.3e}")
    return result
