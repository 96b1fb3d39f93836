# app/services.py
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import structlog

from .benchmarks import gen_benchmark
from .circuit import Circuit
from .config import CircuitSpec, ExperimentConfig, expand_sweep
from .metrics import (
    DelayStats,
    bsm_profile,
    delay_stats,
    demand_matrix,
    peak_bsm_requirement,
    write_bsm_profile_csv,
    write_delay_ratio_csv,
    write_delay_stats_csv,
    write_demand_csv,
    write_events_jsonl,
    write_partition_costs_csv,
    write_peaks_csv,
)
from .program import DistributedProgram, annotate_program, compare_partitioners, partition_cost
from .partition import PartitionCost, Partitioner, partition_circuit
from .qasm import emit_qasm, parse_qasm
from .scheduler import ExperimentReport, Strategy, run_experiment
from .topology import Network
from . import workers

log = structlog.get_logger("services")


# ----- Helpers -----
def _dynamic_side(reports: Dict[Strategy, ExperimentReport]) -> Optional[ExperimentReport]:
    return reports.get(Strategy.DYNAMIC_LOOKAHEAD) or reports.get(Strategy.DYNAMIC)


def _static_side(reports: Dict[Strategy, ExperimentReport]) -> Optional[ExperimentReport]:
    return reports.get(Strategy.STATIC_PROB) or reports.get(Strategy.STATIC_EXPECTED)


def _write_json(path: Path, data: object) -> Path:
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")
    return path


@dataclass
class PointResult:
    label: str
    cfg: ExperimentConfig
    program: DistributedProgram
    network: Network
    reports: Dict[Strategy, ExperimentReport] = field(default_factory=dict)

    @property
    def paired(self) -> Optional[DelayStats]:
        dyn, static = _dynamic_side(self.reports), _static_side(self.reports)
        if dyn is None or static is None:
            return None
        return delay_stats(dyn, static)

    @property
    def primary(self) -> ExperimentReport:
        return next(iter(self.reports.values()))


# ----- Pipeline steps -----
def build_circuit(spec: CircuitSpec, seed: int) -> Circuit:
    if spec.qasm_path:
        return parse_qasm(Path(spec.qasm_path).read_text())
    return gen_benchmark(
        spec.kind,
        spec.n,
        seed=seed,
        depth=spec.depth,
        rounds=spec.rounds,
        edge_prob=spec.edge_prob,
        secret=spec.secret,
    )


def build_program(cfg: ExperimentConfig) -> DistributedProgram:
    circuit = build_circuit(cfg.circuit, cfg.circuit_seed)
    p = cfg.partition
    windowed = partition_circuit(circuit, p.method, cfg.parts, p.capacity, p.window_size)
    program = annotate_program(circuit, windowed)
    cost = partition_cost(program, packing=p.packing)
    log.info(
        "program.built",
        circuit=cfg.circuit.label,
        qubits=circuit.num_qubits,
        gates=len(circuit),
        parts=cfg.parts,
        method=p.method.value,
        nonlocal_gates=cost.nonlocal_gates,
        teleports=cost.teleports,
    )
    return program


def _prepare(cfg: ExperimentConfig) -> PointResult:
    return PointResult(cfg.label or cfg.circuit.label, cfg, build_program(cfg), cfg.topology.to_network())


async def evaluate(cfg: ExperimentConfig, workers_n: int = 1) -> PointResult:
    """generate -> partition -> annotate -> simulate every configured strategy."""
    point = _prepare(cfg)
    phys = cfg.physical.to_physical()
    for strategy in cfg.simulation.strategies:
        sim = cfg.simulation.sim_config(strategy)
        log.info("simulate.start", label=point.label, strategy=strategy.value, trials=cfg.simulation.trials)
        point.reports[strategy] = await workers.run_trials(
            point.program, point.network, phys, sim, cfg.simulation.trials, workers_n
        )
    return point


def evaluate_point(cfg: ExperimentConfig) -> PointResult:
    """In-process evaluation of one sweep point; the unit of work for sweep fan-out."""
    point = _prepare(cfg)
    phys = cfg.physical.to_physical()
    for strategy in cfg.simulation.strategies:
        sim = cfg.simulation.sim_config(strategy)
        point.reports[strategy] = run_experiment(
            point.program, point.network, phys, sim, cfg.simulation.trials
        )
    return point


# ----- Outputs -----
def write_point(point: PointResult, out: Path) -> List[Path]:
    out.mkdir(parents=True, exist_ok=True)
    cfg = point.cfg
    written = [_write_json(out / "config.json", cfg.model_dump(mode="json"))]
    written.append(write_delay_stats_csv(out / "delay_stats.csv", [(point.label, r) for r in point.reports.values()]))
    if point.paired is not None:
        written.append(write_delay_ratio_csv(out / "delay_ratio.csv", [(point.label, point.paired)]))

    primary = point.primary
    written.append(write_demand_csv(out / "demand.csv", demand_matrix(primary.results, point.program)))
    first = primary.results[0]
    written.append(write_bsm_profile_csv(out / "bsm_profile.csv", bsm_profile(first), point.network))
    if cfg.simulation.unlimited_resources:
        peaks = peak_bsm_requirement(primary.results)
        written.append(write_peaks_csv(out / "bsm_peaks.csv", peaks, point.network))
    if cfg.emit_events:
        written.append(write_events_jsonl(out / "events.jsonl", first.events))
    return written


async def run_config(cfg: ExperimentConfig, workers_n: int = 1) -> Tuple[PointResult, List[Path]]:
    point = await evaluate(cfg, workers_n)
    written = write_point(point, Path(cfg.out_dir))
    log.info("run.done", label=point.label, out_dir=cfg.out_dir, files=len(written))
    return point, written


async def run_sweep(cfg: ExperimentConfig, workers_n: int = 1) -> Tuple[List[PointResult], List[Path]]:
    points_cfg = expand_sweep(cfg)
    log.info("sweep.start", points=len(points_cfg), workers=workers_n)
    points = await workers.map_ordered(evaluate_point, [c for _, c in points_cfg], workers_n)
    for point in points:
        log.info("sweep.point.done", label=point.label, mean_ns=point.primary.mean_ns)

    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = [_write_json(out / "config.json", cfg.model_dump(mode="json"))]
    written.append(
        write_delay_stats_csv(
            out / "delay_stats.csv", [(p.label, r) for p in points for r in p.reports.values()]
        )
    )
    ratios = [(p.label, p.paired) for p in points if p.paired is not None]
    if ratios:
        written.append(write_delay_ratio_csv(out / "delay_ratio.csv", ratios))
    return points, written


def run_partition(cfg: ExperimentConfig) -> Tuple[List[Tuple[Partitioner, PartitionCost]], List[Path]]:
    circuit = build_circuit(cfg.circuit, cfg.circuit_seed)
    p = cfg.partition
    rows = compare_partitioners(circuit, cfg.parts, p.capacity, p.window_size)
    program = annotate_program(circuit, partition_circuit(circuit, p.method, cfg.parts, p.capacity, p.window_size))

    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = [
        write_partition_costs_csv(out / "partition_costs.csv", cfg.circuit.label, rows),
        _write_json(out / "program.json", program.to_dict()),
    ]
    return rows, written


def generate_qasm(cfg: ExperimentConfig) -> str:
    return emit_qasm(build_circuit(cfg.circuit, cfg.circuit_seed))
