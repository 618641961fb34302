"""PPIFE convergence pipeline: mesh, classify, IFE space, solve, recover, measure."""

from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from time import perf_counter
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
from ovos_utils.log import LOG

from ife_lab.solver.constants import LARGE_LEVEL, METHOD_NAMES, METHODS, SUPPORTED_BENCHMARKS, TABLE_FORMATS
from ife_lab.solver.logic.assembly import AssembledSystem, assemble, write_system
from ife_lab.solver.logic.errors import IfeLabError, InvalidArgumentError, StageError
from ife_lab.solver.logic.ife_space import FemSpace, build_space
from ife_lab.solver.logic.linalg import DENSE_LIMIT
from ife_lab.solver.logic.mesh import InterfaceMesh, classify, write_mesh
from ife_lab.solver.logic.metrics import ConvergenceTable, ErrorReport, compute_errors
from ife_lab.solver.logic.nonlinear import solve_linear, solve_semilinear
from ife_lab.solver.logic.problem import PenaltyConfig
from ife_lab.solver.logic.recovery import RecoveredField, recover, write_recovery


@dataclass(frozen=True)
class RunConfig:
    """Validated settings of one convergence study."""

    benchmark: str
    method: str = "sym"
    beta: Optional[Tuple[float, float]] = None
    sigma0: Optional[float] = None
    levels: Tuple[int, ...] = ()
    fmt: str = "csv"
    out: Optional[str] = None
    dump_mesh: Optional[str] = None
    dump_system: Optional[str] = None
    dump_recovery: Optional[str] = None
    allow_large: bool = False
    newton_tol: float = 1e-10
    newton_max_iter: int = 25
    linear_rtol: float = 1e-12
    dense_threshold: int = 0

    def __post_init__(self):
        if self.benchmark not in SUPPORTED_BENCHMARKS:
            raise InvalidArgumentError(
                f"Unknown benchmark '{self.benchmark}'; choose from {', '.join(SUPPORTED_BENCHMARKS)}"
            )
        if self.method not in METHODS:
            raise InvalidArgumentError(f"Unknown method '{self.method}'; choose from {', '.join(METHODS)}")
        if self.fmt not in TABLE_FORMATS:
            raise InvalidArgumentError(f"Unknown format '{self.fmt}'; choose from {', '.join(TABLE_FORMATS)}")
        if not self.levels:
            raise InvalidArgumentError("At least one level is required")
        if any(int(n) != n or n < 2 for n in self.levels):
            raise InvalidArgumentError(f"Levels must be integers >= 2, got {list(self.levels)}")
        if any(b <= a for a, b in zip(self.levels, self.levels[1:])):
            raise InvalidArgumentError(f"Levels must be strictly increasing, got {list(self.levels)}")
        if max(self.levels) > LARGE_LEVEL and not self.allow_large:
            raise InvalidArgumentError(f"Levels above n={LARGE_LEVEL} need --allow-large")
        if self.beta is not None and (len(self.beta) != 2 or min(self.beta) <= 0.0):
            raise InvalidArgumentError(f"--beta takes two positive values, got {self.beta}")
        if self.sigma0 is not None and self.sigma0 <= 0.0:
            raise InvalidArgumentError(f"sigma0 must be positive, got {self.sigma0}")
        if not 0 <= self.dense_threshold <= DENSE_LIMIT:
            raise InvalidArgumentError(f"dense_threshold must lie in [0, {DENSE_LIMIT}]")

    @property
    def epsilon(self) -> int:
        return METHODS[self.method]


@dataclass
class LevelResult:
    n: int
    mesh: InterfaceMesh
    space: FemSpace
    system: AssembledSystem
    u: np.ndarray
    recovery: RecoveredField
    report: ErrorReport
    timings: Dict[str, float] = field(default_factory=dict)


def _level_path(path: Optional[str], n: int, levels: Sequence[int]) -> Optional[Path]:
    """One dump file per level: ``mesh.txt`` becomes ``mesh_n32.txt`` on multi-level runs."""
    if path is None:
        return None
    path = Path(path)
    if len(levels) == 1:
        return path
    return path.with_name(f"{path.stem}_n{n}{path.suffix}")


class PpifeSolver:
    """Runs the PPIFE pipeline of one benchmark over a refinement ladder."""

    def __init__(self, config: RunConfig):
        """Constructor

        Args:
            config (RunConfig): The study settings.
        """
        self.config = config
        self.benchmark = SUPPORTED_BENCHMARKS[config.benchmark]()
        self.problem = self.benchmark.problem(config.beta)
        self.penalty = PenaltyConfig.for_epsilon(config.epsilon, self.problem.beta_max, config.sigma0)
        LOG.info(
            f"{METHOD_NAMES[config.method]} (epsilon={self.penalty.epsilon}, sigma0={self.penalty.sigma0:.4g}) "
            f"on '{self.problem.name}', levels {list(config.levels)}"
        )

    @contextmanager
    def _stage(self, n: int, name: str, timings: Dict[str, float]):
        start = perf_counter()
        try:
            yield
        except StageError:
            raise
        except (IfeLabError, np.linalg.LinAlgError, ValueError) as exc:
            raise StageError(n, name, exc) from exc
        finally:
            timings[name] = perf_counter() - start

    def run_level(self, n: int) -> LevelResult:
        """Solve and measure one refinement level."""
        cfg, problem = self.config, self.problem
        timings: Dict[str, float] = {}
        with self._stage(n, "mesh", timings):
            mesh = self.benchmark.build_mesh(n)
        with self._stage(n, "classify", timings):
            mesh = classify(mesh, problem.level_set)
            problem.validate(mesh.vertices)
        with self._stage(n, "space", timings):
            space = build_space(mesh, problem.beta_minus, problem.beta_plus)
        with self._stage(n, "solve", timings):
            system = assemble(space, problem, self.penalty)
            if problem.is_nonlinear:
                result = solve_semilinear(
                    space,
                    problem,
                    self.penalty,
                    system,
                    tol=cfg.newton_tol,
                    max_iter=cfg.newton_max_iter,
                    rtol=cfg.linear_rtol,
                    dense_threshold=cfg.dense_threshold,
                )
                LOG.info(f"n={n}: Newton converged in {result.iterations} iterations")
            else:
                result = solve_linear(
                    space, problem, self.penalty, system, rtol=cfg.linear_rtol, dense_threshold=cfg.dense_threshold
                )
        with self._stage(n, "recover", timings):
            rec = recover(space, result.u)
        with self._stage(n, "errors", timings):
            report = compute_errors(
                space, problem, result.u, rec, self.penalty, n=n, newton_iterations=result.iterations
            )

        self._dump(n, mesh, system, rec)
        LOG.info(
            f"n={n}: {space.dof} dofs, {report.interface_elements} interface elements; "
            + ", ".join(f"{stage} {seconds:.2f}s" for stage, seconds in timings.items())
        )
        return LevelResult(n, mesh, space, system, result.u, rec, report, timings)

    def _dump(self, n, mesh, system, rec):
        levels = self.config.levels
        mesh_path = _level_path(self.config.dump_mesh, n, levels)
        if mesh_path:
            write_mesh(mesh, mesh_path)
        system_path = _level_path(self.config.dump_system, n, levels)
        if system_path:
            write_system(system, system_path)
        recovery_path = _level_path(self.config.dump_recovery, n, levels)
        if recovery_path:
            write_recovery(rec, recovery_path)

    def run(self) -> ConvergenceTable:
        """Run every level in order; levels are sequential."""
        table = ConvergenceTable()
        for n in self.config.levels:
            report = self.run_level(n).report
            table.append(report)
            LOG.info(
                f"n={n}: h={report.h:.4g} De={report.De:.3e} Die={report.Die:.3e} Dre={report.Dre:.3e} "
                f"eta={report.eta:.3e} effectivity={report.effectivity:.3f}"
            )
        return table
