"""Command line entry point: ``ife-lab run <benchmark> ...`` and ``ife-lab list``."""

import argparse
import sys
from typing import List, Optional

from ife_lab import ConvergenceStudy
from ife_lab.solver.constants import METHOD_NAMES, METHODS, SUPPORTED_BENCHMARKS, TABLE_FORMATS


def _parse_args(argv: Optional[List[str]] = None) -> argparse.Namespace:
    parser = argparse.ArgumentParser(
        prog="ife-lab",
        description="Partially penalized IFE solver with immersed gradient recovery and convergence tables.",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", help="run a convergence study")
    run.add_argument("benchmark", choices=sorted(SUPPORTED_BENCHMARKS))
    run.add_argument("--method", choices=list(METHODS), default=None, help="penalty variant (default: sym)")
    run.add_argument("--beta", nargs=2, type=float, metavar=("B-", "B+"), default=None)
    run.add_argument("--sigma0", type=float, default=None, help="interface-edge penalty (default: method-dependent)")
    run.add_argument("--levels", nargs="+", type=int, default=None, help="grid spacing 1/n for each level")
    run.add_argument("--format", dest="format", choices=list(TABLE_FORMATS), default=None)
    run.add_argument("--out", default=None, help="write the table here instead of stdout")
    run.add_argument("--dump-mesh", dest="dump_mesh", default=None)
    run.add_argument("--dump-system", dest="dump_system", default=None)
    run.add_argument("--dump-recovery", dest="dump_recovery", default=None)
    run.add_argument("--allow-large", dest="allow_large", action="store_true", default=None)
    run.add_argument("--dense-threshold", dest="dense_threshold", type=int, default=None)
    run.add_argument("--log-level", dest="log_level", default=None, choices=["DEBUG", "INFO", "WARNING", "ERROR"])

    commands.add_parser("list", help="list benchmarks and methods")
    return parser.parse_args(argv)


def _list() -> int:
    for name, benchmark in SUPPORTED_BENCHMARKS.items():
        levels = " ".join(str(n) for n in benchmark.default_levels)
        print(f"{name:10s} {benchmark.description} (levels: {levels})")
    for method, epsilon in METHODS.items():
        print(f"{method:10s} {METHOD_NAMES[method]}, epsilon={epsilon:+d}")
    return 0


def main(argv: Optional[List[str]] = None) -> int:
    args = _parse_args(argv)
    if args.command == "list":
        return _list()
    settings = {key: value for key, value in vars(args).items() if key not in ("command", "benchmark")}
    _, code = ConvergenceStudy(args.benchmark, settings).run()
    return code


if __name__ == "__main__":
    sys.exit(main())
