"""Comparison harness: local vs centralized vs federated scenarios."""

from .harness import (
    ALL_METHODS,
    BenchConfig,
    load_bench_data,
    run_comparison,
    write_reports,
)

__all__ = [
    "ALL_METHODS",
    "BenchConfig",
    "load_bench_data",
    "run_comparison",
    "write_reports",
]
