# pylint: disable=missing-function-docstring
"""ife-lab: partially penalized immersed finite elements with gradient recovery."""

from pathlib import Path
from typing import Optional, Tuple

from ovos_utils.log import LOG

from ife_lab.solver import PpifeSolver, RunConfig
from ife_lab.solver.constants import SUPPORTED_BENCHMARKS
from ife_lab.solver.logic.errors import IfeLabError
from ife_lab.solver.logic.metrics import ConvergenceTable


class ConvergenceStudy:
    """Settings-driven convergence study over one benchmark."""

    _settings_defaults = {
        "method": "sym",
        "levels": None,
        "format": "csv",
        "sigma0": None,
        "beta": None,
        "allow_large": False,
        "out": None,
        "dump_mesh": None,
        "dump_system": None,
        "dump_recovery": None,
        "newton_tol": 1e-10,
        "newton_max_iter": 25,
        "linear_rtol": 1e-12,
        "dense_threshold": 0,
        "log_level": "INFO",
    }

    def __init__(self, benchmark: str, settings: Optional[dict] = None):
        """Constructor

        Args:
            benchmark (str): Benchmark name, one of SUPPORTED_BENCHMARKS.
            settings (dict): Overrides of the default settings; ``None`` values fall back to defaults.
        """
        self.benchmark = benchmark
        self.settings = {key: value for key, value in (settings or {}).items() if value is not None}

    def _get_setting(self, setting_name):
        """Helper method to get a setting with its default value."""
        return self.settings.get(setting_name, self._settings_defaults[setting_name])

    def _set_setting(self, setting_name, value):
        self.settings[setting_name] = value

    @property
    def method(self) -> str:
        return self._get_setting("method")

    @property
    def levels(self) -> Tuple[int, ...]:
        levels = self._get_setting("levels")
        if levels is None and self.benchmark in SUPPORTED_BENCHMARKS:
            levels = SUPPORTED_BENCHMARKS[self.benchmark].default_levels
        return tuple(int(n) for n in levels or ())

    @levels.setter
    def levels(self, value):
        self._set_setting("levels", value)

    @property
    def table_format(self) -> str:
        return self._get_setting("format")

    @property
    def out(self) -> Optional[str]:
        return self._get_setting("out")

    @property
    def log_level(self) -> str:
        return str(self._get_setting("log_level")).upper()

    def config(self) -> RunConfig:
        beta = self._get_setting("beta")
        return RunConfig(
            benchmark=self.benchmark,
            method=self.method,
            beta=tuple(float(b) for b in beta) if beta is not None else None,
            sigma0=self._get_setting("sigma0"),
            levels=self.levels,
            fmt=self.table_format,
            out=self.out,
            dump_mesh=self._get_setting("dump_mesh"),
            dump_system=self._get_setting("dump_system"),
            dump_recovery=self._get_setting("dump_recovery"),
            allow_large=bool(self._get_setting("allow_large")),
            newton_tol=float(self._get_setting("newton_tol")),
            newton_max_iter=int(self._get_setting("newton_max_iter")),
            linear_rtol=float(self._get_setting("linear_rtol")),
            dense_threshold=int(self._get_setting("dense_threshold")),
        )

    def run(self) -> Tuple[Optional[ConvergenceTable], int]:
        """Run the study and write the table; returns (table, exit code)."""
        LOG.set_level(self.log_level)
        try:
            config = self.config()
            table = PpifeSolver(config).run()
        except IfeLabError as exc:
            LOG.exception(f"Convergence study failed: {exc}")
            return None, 1
        text = table.render(config.fmt)
        if config.out:
            with Path(config.out).open("w", encoding="utf-8", newline="\n") as handle:
                handle.write(text)
            LOG.info(f"Table written to {config.out}")
        else:
            print(text, end="")
        return table, 0
