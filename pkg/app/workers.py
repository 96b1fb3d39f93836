# app/workers.py
"""Process-pool fan-out for trials and sweep points.

Work is split into index-tagged chunks and merged back by index, so the
output never depends on the worker count.
"""
from __future__ import annotations

import asyncio
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, List, Sequence, Tuple, TypeVar

import structlog

from .physical import PhysicalConfig
from .program import DistributedProgram
from .scheduler import ExperimentReport, SimConfig, TrialResult, run_experiment, simulate, trial_config
from .topology import Network

log = structlog.get_logger("workers")

T = TypeVar("T")
R = TypeVar("R")


def _chunks(n: int, workers: int) -> List[List[int]]:
    return [list(range(i, n, workers)) for i in range(min(workers, n))]


def _run_trial_chunk(
    program: DistributedProgram,
    net: Network,
    phys: PhysicalConfig,
    sim: SimConfig,
    trials: List[int],
) -> List[Tuple[int, TrialResult]]:
    return [(i, simulate(program, net, phys, trial_config(sim, i))) for i in trials]


async def run_trials(
    program: DistributedProgram,
    net: Network,
    phys: PhysicalConfig,
    sim: SimConfig,
    trials: int,
    workers: int = 1,
) -> ExperimentReport:
    if workers <= 1 or trials <= 1:
        return run_experiment(program, net, phys, sim, trials)

    loop = asyncio.get_running_loop()
    log.info("pool.started", workers=workers, trials=trials, strategy=sim.strategy.value)
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [
            loop.run_in_executor(pool, _run_trial_chunk, program, net, phys, sim, chunk)
            for chunk in _chunks(trials, workers)
        ]
        parts = await asyncio.gather(*futures)
    merged = sorted((pair for part in parts for pair in part), key=lambda p: p[0])
    report = ExperimentReport(sim, [r for _, r in merged], program, net)
    log.info("experiment.done", strategy=sim.strategy.value, trials=trials, mean_ns=report.mean_ns)
    return report


def _apply_chunk(fn: Callable[[T], R], items: List[Tuple[int, T]]) -> List[Tuple[int, R]]:
    return [(i, fn(item)) for i, item in items]


async def map_ordered(fn: Callable[[T], R], items: Sequence[T], workers: int = 1) -> List[R]:
    """``[fn(x) for x in items]`` spread over processes; ``fn`` must be picklable."""
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    tagged = list(enumerate(items))
    loop = asyncio.get_running_loop()
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [
            loop.run_in_executor(pool, _apply_chunk, fn, [tagged[i] for i in chunk])
            for chunk in _chunks(len(tagged), workers)
        ]
        parts = await asyncio.gather(*futures)
    return [r for _, r in sorted((pair for part in parts for pair in part), key=lambda p: p[0])]
