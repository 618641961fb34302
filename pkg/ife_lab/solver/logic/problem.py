"""Interface problem description and penalty settings."""

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from ife_lab.solver.logic.errors import AssemblyError, InvalidArgumentError
from ife_lab.solver.logic.mesh import LevelSet

MINUS = -1
PLUS = 1


def constant(value: float) -> Callable:
    """Vectorised constant coefficient."""

    def evaluate(x, y):
        return np.full(np.broadcast(np.asarray(x), np.asarray(y)).shape, float(value))

    return evaluate


@dataclass(frozen=True, eq=False)
class ExactSolution:
    """Piecewise exact solution; gradients return an (gx, gy) pair of arrays."""

    minus: Callable
    plus: Callable
    grad_minus: Callable
    grad_plus: Callable

    def value(self, side: int, x, y):
        return (self.minus if side < 0 else self.plus)(x, y)

    def gradient(self, side: int, x, y):
        gx, gy = (self.grad_minus if side < 0 else self.grad_plus)(x, y)
        return np.stack(np.broadcast_arrays(gx, gy), axis=-1)

    def at(self, level_set: LevelSet, points):
        """Values at arbitrary points, choosing the branch by the sign of the level set."""
        p = np.asarray(points, dtype=float)
        x, y = p[..., 0], p[..., 1]
        return np.where(level_set.at(p) < 0.0, self.minus(x, y), self.plus(x, y))

    def gradient_at(self, level_set: LevelSet, points):
        p = np.asarray(points, dtype=float)
        x, y = p[..., 0], p[..., 1]
        inside = (level_set.at(p) < 0.0)[..., None]
        return np.where(inside, self.gradient(MINUS, x, y), self.gradient(PLUS, x, y))


@dataclass(frozen=True, eq=False)
class Nonlinearity:
    """Reaction term s(u) and its derivative s'(u)."""

    value: Callable
    derivative: Callable


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    """-div(beta grad u) + s(u) = f with [u] = 0 and [beta du/dn] = g across the interface."""

    name: str
    level_set: LevelSet
    beta_minus: Callable
    beta_plus: Callable
    source_minus: Callable
    source_plus: Callable
    dirichlet: Callable
    beta_max: float
    flux_jump: float = 0.0
    nonlinearity: Optional[Nonlinearity] = None
    exact: Optional[ExactSolution] = None

    def beta(self, side: int, x, y):
        return np.asarray((self.beta_minus if side < 0 else self.beta_plus)(x, y), dtype=float)

    def source(self, side: int, x, y):
        return np.asarray((self.source_minus if side < 0 else self.source_plus)(x, y), dtype=float)

    @property
    def is_nonlinear(self) -> bool:
        return self.nonlinearity is not None

    def validate(self, points) -> None:
        """Check the flux jump is homogeneous and beta stays positive on sample points."""
        if self.flux_jump != 0.0:
            raise AssemblyError(f"Nonzero flux jump g={self.flux_jump} is not supported")
        p = np.asarray(points, dtype=float)
        for side in (MINUS, PLUS):
            values = self.beta(side, p[:, 0], p[:, 1])
            if not np.all(values > 0.0):
                raise InvalidArgumentError(f"beta{'-' if side < 0 else '+'} must be positive on the domain")


@dataclass(frozen=True)
class PenaltyConfig:
    """Adjoint-consistency switch epsilon and the interface-edge penalty sigma0."""

    epsilon: int
    sigma0: float

    def __post_init__(self):
        if self.epsilon not in (-1, 0, 1):
            raise InvalidArgumentError(f"epsilon must be -1, 0 or 1, got {self.epsilon}")
        if not self.sigma0 > 0.0:
            raise InvalidArgumentError(f"sigma0 must be positive, got {self.sigma0}")

    @property
    def symmetric(self) -> bool:
        return self.epsilon == -1

    @classmethod
    def for_epsilon(cls, epsilon: int, beta_max: float, sigma0: Optional[float] = None) -> "PenaltyConfig":
        """Default penalty: sqrt(max beta) for the symmetric and incomplete forms, 1 for the nonsymmetric one."""
        if sigma0 is None:
            sigma0 = 1.0 if epsilon == 1 else float(np.sqrt(beta_max))
        return cls(epsilon=epsilon, sigma0=float(sigma0))
