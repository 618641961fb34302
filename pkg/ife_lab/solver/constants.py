"""Benchmark and method registries used by the convergence driver."""

from ife_lab.solver.logic.benchmarks import (
    CardioidBenchmark,
    CircleBenchmark,
    NonlinearRingBenchmark,
    QuinticCircleBenchmark,
)

SUPPORTED_BENCHMARKS = {
    "circle": CircleBenchmark,
    "circle5": QuinticCircleBenchmark,
    "cardioid": CardioidBenchmark,
    "ring": NonlinearRingBenchmark,
}

# symmetric, incomplete and nonsymmetric partially penalized forms
METHODS = {
    "sym": -1,
    "inc": 0,
    "nonsym": 1,
}

METHOD_NAMES = {
    "sym": "SPPIFEM",
    "inc": "IPPIFEM",
    "nonsym": "NPPIFEM",
}

TABLE_FORMATS = ("csv", "markdown")

LARGE_LEVEL = 512
