"""Error norms against a manufactured solution and observed convergence orders."""

import csv
import io
import math
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional

import numpy as np

from ife_lab.solver.logic.assembly import edge_half_functions, interface_edge_segments
from ife_lab.solver.logic.errors import InvalidArgumentError, MissingExactSolutionError
from ife_lab.solver.logic.ife_space import FemSpace
from ife_lab.solver.logic.problem import MINUS, PLUS, PenaltyConfig, ProblemSpec
from ife_lab.solver.logic.quadrature import quad_triangle, reference_rule
from ife_lab.solver.logic.recovery import RecoveredField, estimate

ERROR_DEGREE = 4
ORDER_COLUMNS = ("De", "Die", "Dre")
CSV_HEADER = ["h", "De", "order", "Die", "order", "Dre", "order", "eta", "effectivity"]


@dataclass
class ErrorReport:
    """Errors of one refinement level; ``h`` is the grid spacing, ``h_max`` the largest diameter."""

    h: float
    De: float
    Die: float
    Dre: float
    energy: float
    eta: float
    effectivity: float
    l2: float = 0.0
    h_max: float = 0.0
    n: int = 0
    dof: int = 0
    interface_elements: int = 0
    newton_iterations: int = 0

    def as_dict(self) -> dict:
        return asdict(self)


def _fmt(value: float) -> str:
    return f"{value:.5e}"


def _fmt_order(value: Optional[float]) -> str:
    return "" if value is None or not math.isfinite(value) else f"{value:.2f}"


@dataclass
class ConvergenceTable:
    rows: List[ErrorReport] = field(default_factory=list)

    def append(self, report: ErrorReport) -> None:
        self.rows.append(report)

    def __len__(self) -> int:
        return len(self.rows)

    def orders(self) -> Dict[str, List[Optional[float]]]:
        """Order columns aligned with the rows (None on the first row)."""
        if len(self.rows) < 2:
            return {name: [None] * len(self.rows) for name in ORDER_COLUMNS}
        return {name: [None] + values for name, values in observed_orders(self).items()}

    def _cells(self):
        orders = self.orders()
        for k, row in enumerate(self.rows):
            yield [
                _fmt(row.h),
                _fmt(row.De),
                _fmt_order(orders["De"][k]),
                _fmt(row.Die),
                _fmt_order(orders["Die"][k]),
                _fmt(row.Dre),
                _fmt_order(orders["Dre"][k]),
                _fmt(row.eta),
                _fmt(row.effectivity),
            ]

    def to_csv(self) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        writer.writerows(self._cells())
        return buffer.getvalue()

    def to_markdown(self) -> str:
        lines = ["| " + " | ".join(CSV_HEADER) + " |", "|" + "---|" * len(CSV_HEADER)]
        for cells in self._cells():
            lines.append("| " + " | ".join(cell or "--" for cell in cells) + " |")
        return "\n".join(lines) + "\n"

    def render(self, fmt: str) -> str:
        if fmt == "csv":
            return self.to_csv()
        if fmt == "markdown":
            return self.to_markdown()
        raise InvalidArgumentError(f"Unknown table format '{fmt}'")


def observed_orders(table: ConvergenceTable) -> Dict[str, List[float]]:
    """log(e_prev / e_next) / log(h_prev / h_next) for every consecutive pair of rows."""
    rows = table.rows
    if len(rows) < 2:
        raise InvalidArgumentError("Observed orders need at least two rows")
    hs = np.array([row.h for row in rows])
    if np.any(np.diff(hs) >= 0.0):
        raise InvalidArgumentError(f"Mesh sizes must strictly decrease, got {hs.tolist()}")
    ratios = np.log(hs[:-1] / hs[1:])
    orders = {}
    for name in ORDER_COLUMNS:
        errors = np.array([getattr(row, name) for row in rows], dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            values = np.log(errors[:-1] / errors[1:]) / ratios
        orders[name] = [float(v) if np.isfinite(v) else float("nan") for v in values]
    return orders


def _jump_energy(space: FemSpace, spec: ProblemSpec, u_h, cfg: PenaltyConfig) -> float:
    """sum over interface edges of sigma0/|e| int_e [u_h]^2."""
    total = 0.0
    triangles = space.mesh.triangles
    for segment in interface_edge_segments(space):
        jumps, _ = edge_half_functions(space, spec, segment)
        dofs = np.concatenate([triangles[segment.elements[0]], triangles[segment.elements[1]]])
        jump = jumps @ np.asarray(u_h)[dofs]
        total += cfg.sigma0 / segment.length * float(np.dot(segment.rule.weights, jump**2))
    return total


def compute_errors(
    space: FemSpace,
    spec: ProblemSpec,
    u_h,
    rec: RecoveredField,
    cfg: PenaltyConfig,
    n: int = 0,
    newton_iterations: int = 0,
) -> ErrorReport:
    """De, Die, Dre, the energy norm and the estimator against the exact solution.

    The exact branch and beta are picked by the sign of the level set, the discrete piece by the
    sub-triangle it is integrated on.
    """
    if spec.exact is None:
        raise MissingExactSolutionError(f"Problem '{spec.name}' has no exact solution")
    exact, level_set = spec.exact, spec.level_set
    mesh, sub = space.mesh, rec.submesh
    u_h = np.asarray(u_h, dtype=float)

    bary, _ = reference_rule(ERROR_DEGREE)
    rule = quad_triangle(sub.vertices[sub.triangles], ERROR_DEGREE)
    weights, points = rule.weights, rule.points
    slot = np.where(sub.side < 0, 0, 1)
    u_I = exact.at(level_set, mesh.vertices)

    def piecewise(values):
        """(a, b, c) of the discrete function on every sub-triangle."""
        return np.einsum("skc,sk->sc", space.pieces[slot, sub.parent], values[mesh.triangles[sub.parent]])

    coefficients_h = piecewise(u_h)
    coefficients_i = piecewise(u_I)
    values_h = coefficients_h[:, None, 0] + np.einsum("sqd,sd->sq", points, coefficients_h[:, 1:])
    grad_h = coefficients_h[:, None, 1:]
    grad_i = coefficients_i[:, None, 1:]

    u = exact.at(level_set, points)
    grad_u = exact.gradient_at(level_set, points)
    x, y = points[..., 0], points[..., 1]
    # weight with the coefficient of the true side, like the exact branch above
    beta = np.where(level_set.at(points) < 0.0, space.beta(MINUS, x, y), space.beta(PLUS, x, y))

    def integral(density):
        return float(np.sum(weights * density))

    l2_sq = integral((u - values_h) ** 2)
    semi_sq = integral(np.sum((grad_u - grad_h) ** 2, axis=-1))
    weighted_sq = integral(beta * np.sum((grad_u - grad_h) ** 2, axis=-1))
    die_sq = integral(np.sum((grad_i - grad_h) ** 2, axis=-1))
    dre_sq = integral(np.sum((grad_u - rec.evaluate(bary)) ** 2, axis=-1))

    _, eta = estimate(space, u_h, rec)
    weighted = math.sqrt(weighted_sq)
    return ErrorReport(
        h=mesh.grid_spacing,
        De=math.sqrt(l2_sq + semi_sq),
        Die=math.sqrt(die_sq),
        Dre=math.sqrt(dre_sq),
        energy=math.sqrt(weighted_sq + _jump_energy(space, spec, u_h, cfg)),
        eta=eta,
        effectivity=eta / weighted if weighted > 0.0 else float("nan"),
        l2=math.sqrt(l2_sq),
        h_max=mesh.h,
        n=n,
        dof=space.dof,
        interface_elements=len(space.local),
        newton_iterations=newton_iterations,
    )
