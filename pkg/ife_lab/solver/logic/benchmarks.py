"""Manufactured-solution benchmark problems."""

import math
from typing import Optional, Sequence, Tuple

import numpy as np

from ife_lab.solver.logic.errors import InvalidArgumentError
from ife_lab.solver.logic.mesh import InterfaceMesh, LevelSet, build_square_ring_mesh, build_uniform_square_mesh
from ife_lab.solver.logic.problem import ExactSolution, Nonlinearity, ProblemSpec, constant

CIRCLE_RADIUS = math.pi / 6
RING_RADIUS = math.pi / 3


def _check_beta(beta_minus, beta_plus):
    if not (beta_minus > 0.0 and beta_plus > 0.0):
        raise InvalidArgumentError(f"beta values must be positive, got {beta_minus}, {beta_plus}")


def _radius(x, y):
    return np.sqrt(np.asarray(x, dtype=float) ** 2 + np.asarray(y, dtype=float) ** 2)


def example_circle(beta_minus: float = 1.0, beta_plus: float = 10.0, power: int = 3) -> ProblemSpec:
    """Circular interface of radius pi/6 in [-1, 1]^2 with u = r^p / beta on each side.

    Args:
        beta_minus (float): Coefficient inside the circle.
        beta_plus (float): Coefficient outside the circle.
        power (int): Exponent p >= 2 of the radial solution.
    """
    _check_beta(beta_minus, beta_plus)
    if int(power) != power or power < 2:
        raise InvalidArgumentError(f"power must be an integer >= 2, got {power}")
    r0 = CIRCLE_RADIUS
    shift = (1.0 / beta_minus - 1.0 / beta_plus) * r0**power

    level_set = LevelSet(
        evaluate=lambda x, y: np.asarray(x) ** 2 + np.asarray(y) ** 2 - r0**2,
        gradient=lambda x, y: (2.0 * np.asarray(x), 2.0 * np.asarray(y)),
        name="circle",
    )

    def u_minus(x, y):
        return _radius(x, y) ** power / beta_minus

    def u_plus(x, y):
        return _radius(x, y) ** power / beta_plus + shift

    def gradient(beta):
        def evaluate(x, y):
            scale = power * _radius(x, y) ** (power - 2) / beta
            return scale * np.asarray(x, dtype=float), scale * np.asarray(y, dtype=float)

        return evaluate

    def source(x, y):
        # Laplacian of r^p is p^2 r^(p-2)
        return -float(power * power) * _radius(x, y) ** (power - 2)

    exact = ExactSolution(u_minus, u_plus, gradient(beta_minus), gradient(beta_plus))
    return ProblemSpec(
        name="circle" if power == 3 else f"circle{power}",
        level_set=level_set,
        beta_minus=constant(beta_minus),
        beta_plus=constant(beta_plus),
        source_minus=source,
        source_plus=source,
        dirichlet=lambda x, y: exact.at(level_set, np.stack([x, y], axis=-1)),
        beta_max=max(beta_minus, beta_plus),
        exact=exact,
    )


def cardioid_level_set(x, y):
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    s = x * x + y * y
    return (3.0 * s - x) ** 2 - s


def cardioid_gradient(x, y):
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    w = 3.0 * (x * x + y * y) - x
    return 2.0 * w * (6.0 * x - 1.0) - 2.0 * x, 12.0 * w * y - 2.0 * y


def cardioid_laplacian(x, y):
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    w = 3.0 * (x * x + y * y) - x
    return 2.0 * ((6.0 * x - 1.0) ** 2 + 36.0 * y * y) + 24.0 * w - 4.0


def example_cardioid(beta_plus: float = 100.0) -> ProblemSpec:
    """Cardioid interface with beta^- = xy + 3, beta^+ = 100 and u = phi / beta.

    The interface has a cusp at the origin, which is a vertex of every benchmark mesh.
    """
    _check_beta(1.0, beta_plus)
    level_set = LevelSet(evaluate=cardioid_level_set, gradient=cardioid_gradient, name="cardioid")

    def beta_minus(x, y):
        return np.asarray(x, dtype=float) * np.asarray(y, dtype=float) + 3.0

    def u_minus(x, y):
        return cardioid_level_set(x, y) / beta_minus(x, y)

    def u_plus(x, y):
        return cardioid_level_set(x, y) / beta_plus

    def grad_minus(x, y):
        beta, phi = beta_minus(x, y), cardioid_level_set(x, y)
        px, py = cardioid_gradient(x, y)
        return px / beta - phi * y / beta**2, py / beta - phi * x / beta**2

    def grad_plus(x, y):
        px, py = cardioid_gradient(x, y)
        return px / beta_plus, py / beta_plus

    def source_minus(x, y):
        # -div(beta grad(phi / beta)) with grad(beta) = (y, x) and a harmonic beta
        beta, phi = beta_minus(x, y), cardioid_level_set(x, y)
        px, py = cardioid_gradient(x, y)
        return -cardioid_laplacian(x, y) + (px * y + py * x) / beta - phi * (x * x + y * y) / beta**2

    def source_plus(x, y):
        return -cardioid_laplacian(x, y)

    exact = ExactSolution(u_minus, u_plus, grad_minus, grad_plus)
    return ProblemSpec(
        name="cardioid",
        level_set=level_set,
        beta_minus=beta_minus,
        beta_plus=constant(beta_plus),
        source_minus=source_minus,
        source_plus=source_plus,
        dirichlet=lambda x, y: exact.at(level_set, np.stack([x, y], axis=-1)),
        beta_max=max(4.0, beta_plus),
        exact=exact,
    )


def example_nonlinear_ring(beta_minus: float = 1.0, beta_plus: float = 1000.0) -> ProblemSpec:
    """-div(beta grad u) + sin(u) = f on the square ring with u = log(r) / beta around r0 = pi/3."""
    _check_beta(beta_minus, beta_plus)
    r0 = RING_RADIUS
    shift = (1.0 / beta_minus - 1.0 / beta_plus) * math.log(r0)

    level_set = LevelSet(
        evaluate=lambda x, y: np.asarray(x) ** 2 + np.asarray(y) ** 2 - r0**2,
        gradient=lambda x, y: (2.0 * np.asarray(x), 2.0 * np.asarray(y)),
        name="ring circle",
    )

    def u_minus(x, y):
        return np.log(_radius(x, y)) / beta_minus

    def u_plus(x, y):
        return np.log(_radius(x, y)) / beta_plus + shift

    def gradient(beta):
        def evaluate(x, y):
            r2 = _radius(x, y) ** 2
            return x / (r2 * beta), y / (r2 * beta)

        return evaluate

    exact = ExactSolution(u_minus, u_plus, gradient(beta_minus), gradient(beta_plus))
    return ProblemSpec(
        name="ring",
        level_set=level_set,
        beta_minus=constant(beta_minus),
        beta_plus=constant(beta_plus),
        # log r is harmonic away from the origin
        source_minus=lambda x, y: np.sin(u_minus(x, y)),
        source_plus=lambda x, y: np.sin(u_plus(x, y)),
        dirichlet=lambda x, y: exact.at(level_set, np.stack([x, y], axis=-1)),
        beta_max=max(beta_minus, beta_plus),
        nonlinearity=Nonlinearity(np.sin, np.cos),
        exact=exact,
    )


class Benchmark:
    """A benchmark problem together with its domain and default refinement ladder.

    A level ``n`` always means grid spacing h = 1/n, so a domain of width w gets w*n
    cells per side.
    """

    name = "benchmark"
    description = ""
    default_beta: Optional[Tuple[float, float]] = None
    default_levels: Sequence[int] = (16, 32, 64, 128)

    def problem(self, beta: Optional[Sequence[float]] = None) -> ProblemSpec:
        """Build the ProblemSpec, optionally overriding (beta^-, beta^+)."""
        raise NotImplementedError

    def build_mesh(self, n: int) -> InterfaceMesh:
        """Uniform mesh of [-1, 1]^2 with grid spacing 1/n."""
        return build_uniform_square_mesh(-1.0, 1.0, -1.0, 1.0, 2 * n)

    @property
    def nonlinear(self) -> bool:
        return False


class CircleBenchmark(Benchmark):
    name = "circle"
    description = "circular interface r0=pi/6 in [-1,1]^2, u=r^3/beta"
    default_beta = (1.0, 10.0)

    def problem(self, beta=None):
        return example_circle(*(beta or self.default_beta))


class QuinticCircleBenchmark(CircleBenchmark):
    name = "circle5"
    description = "circular interface r0=pi/6 in [-1,1]^2, u=r^5/beta"

    def problem(self, beta=None):
        return example_circle(*(beta or self.default_beta), power=5)


class CardioidBenchmark(Benchmark):
    name = "cardioid"
    description = "cardioid interface in [-1,1]^2, beta-=xy+3, beta+=100, u=phi/beta"

    def problem(self, beta=None):
        if beta is not None:
            raise InvalidArgumentError("The cardioid benchmark has fixed coefficients; drop --beta")
        return example_cardioid()


class NonlinearRingBenchmark(Benchmark):
    name = "ring"
    description = "-div(beta grad u)+sin(u)=f on [-2,2]^2 minus [-0.5,0.5]^2, u=log(r)/beta"
    default_beta = (1.0, 1000.0)
    default_levels = (8, 16, 32, 64)

    def problem(self, beta=None):
        return example_nonlinear_ring(*(beta or self.default_beta))

    def build_mesh(self, n):
        # 4n cells across [-2, 2]; the hole edges are grid lines for even n
        if n % 2:
            raise InvalidArgumentError(f"The ring benchmark needs even levels, got n={n}")
        return build_square_ring_mesh(2.0, 0.5, 4 * n)

    @property
    def nonlinear(self) -> bool:
        return True
