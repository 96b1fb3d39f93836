# app/scheduler.py
"""Event-driven execution of a distributed program on a Clos network.

One engine runs every strategy. Each loop iteration serves the front layer
(zero-cost nodes execute at once, non-local nodes reserve a path and start
generating), optionally starts lookahead generation for the next layers,
records a BSM sample, then advances to the next completion or expiry time.

Static strategies add a layer barrier: a non-local node may only start
generating once every node of the earlier ASAP layers has executed.
"""
from __future__ import annotations

import heapq
import itertools
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Dict, List, Mapping, Optional, Protocol, Set, Tuple

import numpy as np
import structlog

from .errors import ConfigError, SchedulingStalled
from .physical import (
    DEFAULT_ATTEMPT_CAP,
    PhysicalConfig,
    ProtocolParams,
    RandomStream,
    expected_generation_time,
    sample_generation,
)
from .program import DistributedProgram, ProgramNode
from .topology import Network, QpuPair, Reservation, ResourceLedger, classify_pair

log = structlog.get_logger("scheduler")


class Strategy(str, Enum):
    STATIC_EXPECTED = "static_expected"
    STATIC_PROB = "static_prob"
    DYNAMIC = "dynamic"
    DYNAMIC_LOOKAHEAD = "dynamic_lookahead"

    @property
    def layered(self) -> bool:
        return self in (Strategy.STATIC_EXPECTED, Strategy.STATIC_PROB)


class Purpose(str, Enum):
    ON_DEMAND = "on_demand"
    LOOKAHEAD = "lookahead"


class EventKind(str, Enum):
    TASK_START = "task_start"
    TASK_FINISH = "task_finish"
    EXECUTE = "execute"
    RELEASE = "release"
    DISCARD = "discard"
    SAMPLE = "sample"


@dataclass(frozen=True)
class SimConfig:
    strategy: Strategy = Strategy.DYNAMIC
    lookahead_depth: int = 0
    cutoff_ns: Optional[int] = None  # None = pairs never expire
    unlimited_resources: bool = False
    seed: int = 0
    trial: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "strategy", Strategy(self.strategy))
        if self.lookahead_depth < 0:
            raise ConfigError("lookahead depth must be >= 0")
        if self.lookahead_depth and self.strategy is not Strategy.DYNAMIC_LOOKAHEAD:
            raise ConfigError("lookahead depth needs the dynamic_lookahead strategy")
        if self.cutoff_ns is not None and self.cutoff_ns < 0:
            raise ConfigError("cutoff must be >= 0")


@dataclass
class EntanglementTask:
    node: int
    pair: QpuPair
    reservation: Reservation
    start_ns: int
    finish_ns: int
    purpose: Purpose
    attempts: int


@dataclass
class EprPair:
    node: int
    pair: QpuPair
    ready_ns: int
    expiry_ns: Optional[int]
    reservation: Reservation

    def usable_at(self, t: int) -> bool:
        return self.ready_ns <= t and (self.expiry_ns is None or t < self.expiry_ns)


@dataclass(frozen=True)
class Event:
    time_ns: int
    kind: EventKind
    node: Optional[int] = None
    pair: Optional[QpuPair] = None
    purpose: Optional[Purpose] = None
    reservation: Optional[int] = None
    switches: Tuple[int, ...] = ()

    def to_dict(self) -> Dict[str, Any]:
        out: Dict[str, Any] = {"time_ns": self.time_ns, "kind": self.kind.value}
        if self.node is not None:
            out["node"] = self.node
        if self.pair is not None:
            out["pair"] = list(self.pair)
        if self.purpose is not None:
            out["purpose"] = self.purpose.value
        if self.reservation is not None:
            out["reservation"] = self.reservation
        if self.switches:
            out["switches"] = list(self.switches)
        return out


@dataclass(frozen=True)
class BsmSample:
    time_ns: int
    in_use: Tuple[Tuple[int, int], ...]  # (switch id, BSMs held)

    @property
    def max_in_use(self) -> int:
        return max((n for _, n in self.in_use), default=0)


@dataclass
class TrialResult:
    trial: int
    makespan_ns: int
    events: List[Event]
    bsm_samples: List[BsmSample]
    demand: Counter  # executed non-local nodes per QPU pair
    local_demand: Counter  # executed local two-qubit gates per QPU
    attempts: Counter  # generation attempts per QPU pair
    discarded: int
    unavailable: int
    unlimited: bool
    peak_bsm: Dict[int, int]
    peak_comm: Dict[int, int]


class DurationSource(Protocol):
    def duration(
        self, node: ProgramNode, params: ProtocolParams, reconfig_ns: int, generation: int
    ) -> Tuple[int, int]:
        """(duration_ns, attempts) of one generation for ``node``."""


@dataclass(frozen=True)
class SampledDurations:
    seed: int
    trial: int
    cap: int = DEFAULT_ATTEMPT_CAP

    def duration(self, node, params, reconfig_ns, generation):
        stream = RandomStream(self.seed, self.trial, node.id, generation)
        return sample_generation(params, reconfig_ns, stream, self.cap)


class ExpectedDurations:
    def duration(self, node, params, reconfig_ns, generation):
        return expected_generation_time(params, reconfig_ns), 0


@dataclass(frozen=True)
class ScriptedDurations:
    """Fixed generation time per node id; the reconfiguration delay is added on top."""

    table: Mapping[int, int]

    def duration(self, node, params, reconfig_ns, generation):
        if node.id not in self.table:
            raise KeyError(f"no scripted duration for node {node.id}")
        return reconfig_ns + self.table[node.id], 1


_FINISH, _EXPIRE = 0, 1


class _Engine:
    def __init__(
        self,
        program: DistributedProgram,
        net: Network,
        phys: PhysicalConfig,
        sim: SimConfig,
        durations: DurationSource,
    ) -> None:
        if program.num_qpus > net.num_qpus:
            raise ConfigError(f"program needs {program.num_qpus} QPUs, network has {net.num_qpus}")
        self.program = program
        self.net = net
        self.phys = phys
        self.sim = sim
        self.durations = durations
        self.dag = program.dag.copy()
        self.ledger = ResourceLedger(net, unlimited=sim.unlimited_resources)
        self.now = 0
        self.makespan = 0
        self.heap: List[Tuple[int, int, int, int]] = []
        self.in_flight: Dict[int, EntanglementTask] = {}
        self.stored: Dict[int, EprPair] = {}
        self.no_lookahead: Set[int] = set()
        self.generation: Counter = Counter()
        self.events: List[Event] = []
        self.samples: List[BsmSample] = []
        self.demand: Counter = Counter()
        self.local_demand: Counter = Counter()
        self.attempts: Counter = Counter()
        self.discarded = 0
        self._seq = itertools.count()

        layering = program.layering
        self.layer_of: Dict[int, int] = dict(layering.index)
        self.layer_left: List[int] = []
        self.barrier = 0
        if sim.strategy.layered:
            self.layer_left = [len(layer) for layer in layering]

    def _log(self, kind: EventKind, **kw: Any) -> None:
        self.events.append(Event(self.now, kind, **kw))

    def _execute(self, node_id: int) -> None:
        node = self.program.node(node_id)
        self.dag.remove_node(node_id)
        self.makespan = self.now
        if node.is_nonlocal:
            self.demand[node.pair] += 1
        elif node.qpu is not None:
            self.local_demand[node.qpu] += 1
        self._log(EventKind.EXECUTE, node=node_id, pair=node.pair)
        if self.layer_left:
            layer = self.layer_of[node_id]
            self.layer_left[layer] -= 1
            while self.barrier < len(self.layer_left) and self.layer_left[self.barrier] == 0:
                self.barrier += 1

    def _release(self, reservation: Reservation, node: int) -> None:
        self.ledger.release(reservation.id)
        self._log(EventKind.RELEASE, node=node, pair=reservation.pair, reservation=reservation.id)

    def _start(self, node: ProgramNode, purpose: Purpose) -> bool:
        assert node.pair is not None
        res = self.ledger.try_reserve(*node.pair)
        if res is None:
            return False
        params = self.phys.params_for(classify_pair(self.net, *node.pair))
        reconfig = self.phys.reconfig_delay_ns if res.reconfigured else 0
        gen = self.generation[node.id]
        self.generation[node.id] += 1
        duration, attempts = self.durations.duration(node, params, reconfig, gen)
        task = EntanglementTask(node.id, node.pair, res, self.now, self.now + duration, purpose, attempts)
        self.in_flight[node.id] = task
        heapq.heappush(self.heap, (task.finish_ns, _FINISH, node.id, next(self._seq)))
        self._log(
            EventKind.TASK_START,
            node=node.id,
            pair=node.pair,
            purpose=purpose,
            reservation=res.id,
            switches=res.switches,
        )
        return True

    def _serve(self) -> None:
        progressed = True
        while progressed:
            progressed = False
            for node_id in self.dag.front_layer():
                if node_id in self.in_flight:
                    continue
                node = self.program.node(node_id)
                if not node.is_nonlocal:
                    self._execute(node_id)
                    progressed = True
                    continue
                pair = self.stored.get(node_id)
                if pair is not None and not pair.usable_at(self.now):
                    self._discard(node_id)
                elif pair is not None:
                    del self.stored[node_id]
                    self._release(pair.reservation, node_id)
                    self._execute(node_id)
                    progressed = True

        # earliest ASAP layer first, then node id
        for node_id in sorted(self.dag.front_layer(), key=lambda n: (self.layer_of[n], n)):
            if node_id in self.in_flight:
                continue
            if self.layer_left and self.layer_of[node_id] > self.barrier:
                continue
            self._start(self.program.node(node_id), Purpose.ON_DEMAND)

        depth = self.sim.lookahead_depth
        if depth and self.sim.strategy is Strategy.DYNAMIC_LOOKAHEAD:
            for layer in self.dag.generations(limit=depth + 1)[1:]:
                for node_id in layer:
                    if node_id in self.in_flight or node_id in self.stored or node_id in self.no_lookahead:
                        continue
                    node = self.program.node(node_id)
                    if node.is_nonlocal:
                        self._start(node, Purpose.LOOKAHEAD)

    def _sample(self) -> None:
        snapshot = tuple(sorted(self.ledger.bsm_in_use().items()))
        self.samples.append(BsmSample(self.now, snapshot))
        self._log(EventKind.SAMPLE)

    def _finish(self, node_id: int) -> None:
        task = self.in_flight.pop(node_id)
        self.attempts[task.pair] += task.attempts
        self._log(EventKind.TASK_FINISH, node=node_id, pair=task.pair, purpose=task.purpose)
        if task.purpose is Purpose.ON_DEMAND:
            self._release(task.reservation, node_id)
            self._execute(node_id)
            return
        cutoff = self.sim.cutoff_ns
        expiry = None if cutoff is None else self.now + cutoff
        self.stored[node_id] = EprPair(node_id, task.pair, self.now, expiry, task.reservation)
        if expiry is not None:
            heapq.heappush(self.heap, (expiry, _EXPIRE, node_id, next(self._seq)))

    def _discard(self, node_id: int) -> None:
        pair = self.stored.pop(node_id)
        self.discarded += 1
        self.no_lookahead.add(node_id)
        self._log(EventKind.DISCARD, node=node_id, pair=pair.pair, reservation=pair.reservation.id)
        self._release(pair.reservation, node_id)

    def _expire(self, node_id: int) -> None:
        pair = self.stored.get(node_id)
        if pair is not None and pair.expiry_ns is not None and pair.expiry_ns <= self.now:
            self._discard(node_id)

    def _drop_stale(self) -> None:
        while self.heap and self.heap[0][1] == _EXPIRE:
            _, _, node_id, _ = self.heap[0]
            if node_id in self.stored:
                return
            heapq.heappop(self.heap)

    def _advance(self) -> None:
        t = self.heap[0][0]
        self.now = t
        due: List[Tuple[int, int]] = []
        while self.heap and self.heap[0][0] == t:
            _, kind, node_id, _ = heapq.heappop(self.heap)
            due.append((kind, node_id))
        for kind, node_id in sorted(due):
            if kind == _FINISH:
                self._finish(node_id)
            else:
                self._expire(node_id)

    def _unstall(self) -> None:
        if not self.stored:
            raise SchedulingStalled(self.now, self.dag.front_layer(), "no reservation can ever succeed")
        oldest = min(self.stored.values(), key=lambda p: (p.ready_ns, p.node))
        log.debug("scheduler.evict", node=oldest.node, time_ns=self.now)
        self._discard(oldest.node)

    def run(self) -> TrialResult:
        while not self.dag.is_empty():
            self._serve()
            if self.dag.is_empty():
                break
            self._sample()
            self._drop_stale()
            if not self.heap:
                self._unstall()
                continue
            self._advance()

        return TrialResult(
            trial=self.sim.trial,
            makespan_ns=self.makespan,
            events=self.events,
            bsm_samples=self.samples,
            demand=self.demand,
            local_demand=self.local_demand,
            attempts=self.attempts,
            discarded=self.discarded,
            unavailable=self.ledger.unavailable,
            unlimited=self.sim.unlimited_resources,
            peak_bsm=dict(self.ledger.peak_bsm),
            peak_comm=dict(self.ledger.peak_comm),
        )


def _default_durations(sim: SimConfig, phys: PhysicalConfig) -> DurationSource:
    if sim.strategy is Strategy.STATIC_EXPECTED:
        return ExpectedDurations()
    return SampledDurations(sim.seed, sim.trial, phys.attempt_cap)


def simulate(
    program: DistributedProgram,
    net: Network,
    phys: PhysicalConfig,
    sim: SimConfig,
    durations: Optional[DurationSource] = None,
) -> TrialResult:
    durations = durations or _default_durations(sim, phys)
    result = _Engine(program, net, phys, sim, durations).run()
    log.debug(
        "trial.done",
        strategy=sim.strategy.value,
        trial=sim.trial,
        makespan_ns=result.makespan_ns,
        discarded=result.discarded,
    )
    return result


def run_static_expected(
    program: DistributedProgram, net: Network, phys: PhysicalConfig, unlimited: bool = False
) -> TrialResult:
    sim = SimConfig(Strategy.STATIC_EXPECTED, unlimited_resources=unlimited)
    return simulate(program, net, phys, sim)


def run_static_prob(
    program: DistributedProgram,
    net: Network,
    phys: PhysicalConfig,
    durations: Optional[DurationSource] = None,
    *,
    seed: int = 0,
    trial: int = 0,
    unlimited: bool = False,
) -> TrialResult:
    sim = SimConfig(Strategy.STATIC_PROB, unlimited_resources=unlimited, seed=seed, trial=trial)
    return simulate(program, net, phys, sim, durations)


def run_dynamic(
    program: DistributedProgram,
    net: Network,
    phys: PhysicalConfig,
    durations: Optional[DurationSource] = None,
    *,
    seed: int = 0,
    trial: int = 0,
    unlimited: bool = False,
) -> TrialResult:
    sim = SimConfig(Strategy.DYNAMIC, unlimited_resources=unlimited, seed=seed, trial=trial)
    return simulate(program, net, phys, sim, durations)


def run_dynamic_lookahead(
    program: DistributedProgram,
    net: Network,
    phys: PhysicalConfig,
    durations: Optional[DurationSource] = None,
    *,
    k: int = 1,
    cutoff_ns: Optional[int] = None,
    seed: int = 0,
    trial: int = 0,
    unlimited: bool = False,
) -> TrialResult:
    sim = SimConfig(
        Strategy.DYNAMIC_LOOKAHEAD,
        lookahead_depth=k,
        cutoff_ns=cutoff_ns,
        unlimited_resources=unlimited,
        seed=seed,
        trial=trial,
    )
    return simulate(program, net, phys, sim, durations)


@dataclass
class ExperimentReport:
    sim: SimConfig
    results: List[TrialResult] = field(default_factory=list)
    program: Optional[DistributedProgram] = None
    network: Optional[Network] = None

    @property
    def trials(self) -> int:
        return len(self.results)

    @property
    def makespans_ns(self) -> np.ndarray:
        return np.array([r.makespan_ns for r in self.results], dtype=np.int64)

    @property
    def mean_ns(self) -> float:
        return float(self.makespans_ns.mean())

    @property
    def std_ns(self) -> float:
        return float(self.makespans_ns.std(ddof=1)) if self.trials > 1 else 0.0

    @property
    def min_ns(self) -> int:
        return int(self.makespans_ns.min())

    @property
    def max_ns(self) -> int:
        return int(self.makespans_ns.max())

    @property
    def demand(self) -> Counter:
        return sum((r.demand for r in self.results), Counter())

    @property
    def attempts(self) -> Counter:
        return sum((r.attempts for r in self.results), Counter())

    @property
    def discarded(self) -> int:
        return sum(r.discarded for r in self.results)

    @property
    def unavailable(self) -> int:
        return sum(r.unavailable for r in self.results)

    @property
    def peak_bsm(self) -> Dict[int, int]:
        peaks: Dict[int, int] = {}
        for r in self.results:
            for s, n in r.peak_bsm.items():
                peaks[s] = max(peaks.get(s, 0), n)
        return peaks


DurationsFactory = Callable[[SimConfig], DurationSource]


def trial_config(sim: SimConfig, trial: int) -> SimConfig:
    return SimConfig(
        sim.strategy, sim.lookahead_depth, sim.cutoff_ns, sim.unlimited_resources, sim.seed, trial
    )


def run_experiment(
    program: DistributedProgram,
    net: Network,
    phys: PhysicalConfig,
    sim: SimConfig,
    trials: int,
    durations_factory: Optional[DurationsFactory] = None,
) -> ExperimentReport:
    if trials < 1:
        raise ConfigError("trials must be >= 1")
    report = ExperimentReport(sim, program=program, network=net)
    for i in range(trials):
        cfg = trial_config(sim, i)
        durations = durations_factory(cfg) if durations_factory else None
        report.results.append(simulate(program, net, phys, cfg, durations))
    log.info(
        "experiment.done",
        strategy=sim.strategy.value,
        trials=trials,
        mean_ns=report.mean_ns,
        std_ns=report.std_ns,
    )
    return report
