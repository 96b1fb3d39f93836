# app/metrics.py
"""Reductions over trial results and the CSV/JSON-lines writers for them."""
from __future__ import annotations

import csv
import json
import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import structlog

from .partition import PartitionCost, Partitioner
from .program import DistributedProgram
from .scheduler import Event, EventKind, ExperimentReport, TrialResult
from .topology import Network

log = structlog.get_logger("metrics")


@dataclass(frozen=True)
class DemandMatrix:
    """Upper-triangular counts: off-diagonal = executed non-local EPR
    consumptions per QPU pair, diagonal = local two-qubit gates per QPU."""

    counts: np.ndarray

    @property
    def num_qpus(self) -> int:
        return self.counts.shape[0]

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def percent(self) -> np.ndarray:
        if self.total == 0:
            return np.zeros_like(self.counts, dtype=float)
        return self.counts * (100.0 / self.total)

    def mirrored(self) -> np.ndarray:
        pct = self.percent
        return pct + pct.T - np.diag(np.diag(pct))

    @property
    def diagonal_percent(self) -> float:
        return float(np.trace(self.percent))


@dataclass(frozen=True)
class BsmProfile:
    times_ns: Tuple[int, ...]
    in_use: Tuple[Tuple[Tuple[int, int], ...], ...]  # per sample: (switch, held)

    def __len__(self) -> int:
        return len(self.times_ns)


@dataclass(frozen=True)
class PeakRequirement:
    per_switch: Dict[int, int]
    global_max: int


@dataclass(frozen=True)
class StrategyStats:
    mean_ns: float
    std_ns: float
    min_ns: int
    max_ns: int
    trials: int

    @classmethod
    def of(cls, report: ExperimentReport) -> "StrategyStats":
        return cls(report.mean_ns, report.std_ns, report.min_ns, report.max_ns, report.trials)


@dataclass(frozen=True)
class DelayStats:
    dynamic: StrategyStats
    static: StrategyStats
    ratio: float


def demand_matrix(results: Sequence[TrialResult], program: DistributedProgram) -> DemandMatrix:
    if not results:
        raise ValueError("demand matrix needs at least one trial")
    num_qpus = program.num_qpus
    counts = np.zeros((num_qpus, num_qpus), dtype=np.int64)
    for r in results:
        for (a, b), n in r.demand.items():
            counts[a, b] += n
        for q, n in r.local_demand.items():
            counts[q, q] += n
    return DemandMatrix(counts)


def bsm_profile(result: TrialResult) -> BsmProfile:
    """Replay BSM holds from the event log, snapshotting at each sample."""
    holds: Dict[int, Tuple[int, ...]] = {}
    in_use: Counter = Counter()
    switches = sorted(result.peak_bsm)
    times: List[int] = []
    rows: List[Tuple[Tuple[int, int], ...]] = []
    for e in result.events:
        if e.kind is EventKind.TASK_START:
            if e.reservation is None or e.reservation in holds:
                raise ValueError(f"malformed log: bad task start at {e.time_ns}ns")
            holds[e.reservation] = e.switches
            in_use.update(e.switches)
        elif e.kind is EventKind.RELEASE:
            if e.reservation not in holds:
                raise ValueError(f"malformed log: release of unknown reservation {e.reservation}")
            in_use.subtract(holds.pop(e.reservation))
        elif e.kind is EventKind.SAMPLE:
            times.append(e.time_ns)
            rows.append(tuple((s, in_use[s]) for s in switches))
    return BsmProfile(tuple(times), tuple(rows))


def peak_bsm_requirement(results: Sequence[TrialResult]) -> PeakRequirement:
    if not results:
        raise ValueError("peak requirement needs at least one trial")
    if not all(r.unlimited for r in results):
        raise ValueError("peak requirements are only meaningful with unlimited resources")
    per_switch: Dict[int, int] = {}
    for r in results:
        profile = bsm_profile(r)
        for row in profile.in_use:
            for s, n in row:
                per_switch[s] = max(per_switch.get(s, 0), n)
    return PeakRequirement(per_switch, max(per_switch.values(), default=0))


def provision_from_peaks(net: Network, results: Sequence[TrialResult]) -> Network:
    """Network whose capacities equal the peaks observed in unlimited runs."""
    if not results or not all(r.unlimited for r in results):
        raise ValueError("provisioning needs results from unlimited-resource runs")
    bsm: Dict[int, int] = {}
    comm: Dict[int, int] = {}
    for r in results:
        for s, n in r.peak_bsm.items():
            bsm[s] = max(bsm.get(s, 0), n)
        for q, n in r.peak_comm.items():
            comm[q] = max(comm.get(q, 0), n)
    log.debug("provision.peaks", bsm_max=max(bsm.values(), default=0), comm_max=max(comm.values(), default=0))
    return net.with_capacities(bsm=bsm, comm=comm)


def delay_stats(dynamic: ExperimentReport, static: ExperimentReport) -> DelayStats:
    if not dynamic.trials or not static.trials:
        raise ValueError("delay stats need non-empty reports")
    if dynamic.sim.seed != static.sim.seed or dynamic.trials != static.trials:
        raise ValueError("reports are not paired: seed and trial count must match")
    if dynamic.program is not static.program or dynamic.network is not static.network:
        raise ValueError("reports are not paired: they ran different programs or networks")
    d, s = StrategyStats.of(dynamic), StrategyStats.of(static)
    if s.mean_ns == 0:
        ratio = 1.0 if d.mean_ns == 0 else math.inf
    else:
        ratio = d.mean_ns / s.mean_ns
    return DelayStats(d, s, ratio)


# ---- writers ----

STATS_HEADER = ["label", "strategy", "trials", "mean_ns", "std_ns", "min_ns", "max_ns"]


def _fmt(x: float) -> str:
    return f"{x:.3f}"


def stats_row(label: str, report: ExperimentReport) -> List[str]:
    s = StrategyStats.of(report)
    return [label, report.sim.strategy.value, str(s.trials), _fmt(s.mean_ns), _fmt(s.std_ns), str(s.min_ns), str(s.max_ns)]


def write_delay_stats_csv(path: Path, rows: Iterable[Tuple[str, ExperimentReport]]) -> Path:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(STATS_HEADER)
        for label, report in rows:
            w.writerow(stats_row(label, report))
    return path


def write_delay_ratio_csv(path: Path, rows: Iterable[Tuple[str, DelayStats]]) -> Path:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["label", "trials", "dynamic_mean_ns", "static_mean_ns", "ratio"])
        for label, st in rows:
            w.writerow([label, st.dynamic.trials, _fmt(st.dynamic.mean_ns), _fmt(st.static.mean_ns), f"{st.ratio:.6f}"])
    return path


def write_demand_csv(path: Path, matrix: DemandMatrix) -> Path:
    pct = matrix.mirrored()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["qpu"] + [str(q) for q in range(matrix.num_qpus)])
        for q in range(matrix.num_qpus):
            w.writerow([q] + [f"{v:.4f}" for v in pct[q]])
    return path


def write_bsm_profile_csv(path: Path, profile: BsmProfile, net: Optional[Network] = None) -> Path:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sample_index", "time_ns", "switch", "in_use", "max"])
        for i, (t, row) in enumerate(zip(profile.times_ns, profile.in_use)):
            peak = max((n for _, n in row), default=0)
            for s, n in row:
                w.writerow([i, t, net.node(s).name if net else s, n, peak])
    return path


def write_peaks_csv(path: Path, peaks: PeakRequirement, net: Network) -> Path:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["switch", "peak_bsms"])
        for s in sorted(peaks.per_switch):
            w.writerow([net.node(s).name, peaks.per_switch[s]])
        w.writerow(["all", peaks.global_max])
    return path


def write_partition_costs_csv(path: Path, label: str, rows: Iterable[Tuple[Partitioner, PartitionCost]]) -> Path:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["circuit", "partitioner", "nonlocal_gates", "packed_epr", "teleports", "total"])
        for method, cost in rows:
            w.writerow([label, method.value, cost.nonlocal_gates, cost.packed_epr, cost.teleports, cost.total])
    return path


def write_events_jsonl(path: Path, events: Iterable[Event]) -> Path:
    with open(path, "w") as fh:
        for e in events:
            fh.write(json.dumps(e.to_dict(), sort_keys=True) + "\n")
    return path
