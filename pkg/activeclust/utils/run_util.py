"""Run execution utility with parallel fan-out of independent seeded runs."""

import asyncio
from dataclasses import dataclass
from typing import Any, Callable

from ..errors import ActiveClusteringError


@dataclass(frozen=True)
class RunSpec:
    """One independent run: an algorithm name and the seed driving it."""

    algo: str
    seed: int


@dataclass
class RunOutcome:
    spec: RunSpec
    result: Any = None
    error: str | None = None


async def _execute_single_run(spec: RunSpec, run_fn: Callable[[RunSpec], Any]) -> RunOutcome:
    """Execute a single run in a worker thread and capture algorithm errors."""
    try:
        result = await asyncio.to_thread(run_fn, spec)
        return RunOutcome(spec=spec, result=result)
    except (ActiveClusteringError, ValueError) as e:
        return RunOutcome(spec=spec, error=f"{type(e).__name__}: {e}")


async def execute_runs(
    specs: list[RunSpec], run_fn: Callable[[RunSpec], Any], parallel: bool = True
) -> list[RunOutcome]:
    """Execute independent runs sequentially or in parallel; outcomes keep the order of ``specs``."""
    if parallel:
        return await asyncio.gather(*[_execute_single_run(spec, run_fn) for spec in specs])
    return [await _execute_single_run(spec, run_fn) for spec in specs]


def run_all(
    specs: list[RunSpec], run_fn: Callable[[RunSpec], Any], parallel: bool = True
) -> list[RunOutcome]:
    """Synchronous entry point around ``execute_runs``."""
    return asyncio.run(execute_runs(specs, run_fn, parallel=parallel))
