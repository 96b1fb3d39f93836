# app/config.py
from __future__ import annotations

import itertools
import json
import os
import re
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

from dotenv import load_dotenv
from pydantic import BaseModel, BeforeValidator, ConfigDict, Field, model_validator
from typing_extensions import Annotated

from .benchmarks import BenchmarkKind
from .errors import ConfigError
from .partition import Partitioner
from .physical import DEFAULT_ATTEMPT_CAP, PhysicalConfig, ProtocolParams
from .scheduler import SimConfig, Strategy
from .topology import Network, build_clos

load_dotenv()

OUT_DIR = os.getenv("QDC_OUT_DIR", "out")
LOG_LEVEL = os.getenv("QDC_LOG_LEVEL", "INFO")
WORKERS = int(os.getenv("QDC_WORKERS", "1"))
DEFAULT_SEED = int(os.getenv("QDC_SEED", "7"))
DEFAULT_TRIALS = int(os.getenv("QDC_TRIALS", "100"))

_UNITS = {"ns": 1, "us": 1_000, "µs": 1_000, "ms": 1_000_000, "s": 1_000_000_000}
_RE_DURATION = re.compile(r"\s*(\d+(?:\.\d*)?(?:[eE][-+]?\d+)?|\.\d+)\s*(ns|us|µs|ms|s)?\s*")
_NO_CUTOFF = {"inf", "infinity", "none", "null"}


def parse_duration(value: Any) -> int:
    """Integer nanoseconds from an int or a string such as ``"10ms"``."""
    if isinstance(value, bool):
        raise ValueError("a duration cannot be a boolean")
    if isinstance(value, int):
        return value
    if isinstance(value, float):
        if not value.is_integer():
            raise ValueError(f"{value} ns is not a whole number of nanoseconds")
        return int(value)
    if isinstance(value, str):
        m = _RE_DURATION.fullmatch(value)
        if not m:
            raise ValueError(f"bad duration '{value}' (use e.g. 500ns, 1us, 10ms, 2s)")
        return int(round(float(m.group(1)) * _UNITS[m.group(2) or "ns"]))
    raise ValueError(f"bad duration {value!r}")


def parse_cutoff(value: Any) -> Optional[int]:
    if value is None or (isinstance(value, str) and value.strip().lower() in _NO_CUTOFF):
        return None
    return parse_duration(value)


Duration = Annotated[int, BeforeValidator(parse_duration), Field(ge=0)]
AttemptTime = Annotated[int, BeforeValidator(parse_duration), Field(gt=0)]
Cutoff = Annotated[Optional[Annotated[int, Field(ge=0)]], BeforeValidator(parse_cutoff)]
Probability = Annotated[float, Field(gt=0.0, le=1.0)]


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class CircuitSpec(_Section):
    kind: BenchmarkKind = BenchmarkKind.QAOA
    n: int = Field(40, ge=1)
    qasm_path: Optional[str] = None
    seed: Optional[int] = Field(None, ge=0)  # defaults to the simulation seed
    depth: Optional[int] = Field(None, ge=0)
    rounds: int = Field(1, ge=1)
    edge_prob: float = Field(0.5, ge=0.0, le=1.0)
    secret: Optional[str] = None

    @property
    def label(self) -> str:
        if self.qasm_path:
            return Path(self.qasm_path).stem
        return f"{self.kind.value}_n{self.n}"


class PartitionSpec(_Section):
    method: Partitioner = Partitioner.KL
    k: Optional[int] = Field(None, ge=1)  # defaults to every QPU of the topology
    capacity: Optional[int] = Field(None, ge=1)
    window_size: int = Field(100, ge=1)
    packing: bool = False


class TopologySpec(_Section):
    cores: int = Field(2, ge=1)
    aggs: int = Field(4, ge=1)
    racks: int = Field(4, ge=1)
    qpus_per_rack: int = Field(2, ge=1)
    bsms_per_switch: int = Field(5, ge=0)
    comm_qubits_per_qpu: int = Field(2, ge=0)

    @property
    def num_qpus(self) -> int:
        return self.racks * self.qpus_per_rack

    def to_network(self) -> Network:
        return build_clos(
            self.cores, self.aggs, self.racks, self.qpus_per_rack, self.bsms_per_switch, self.comm_qubits_per_qpu
        )


class PhysicalSpec(_Section):
    intra_attempt_time: AttemptTime = 1_000
    intra_success_prob: Probability = 0.5
    cross_attempt_time: AttemptTime = 10_000_000
    cross_success_prob: Probability = 0.2
    reconfig_delay: Duration = 1_000_000
    attempt_cap: int = Field(DEFAULT_ATTEMPT_CAP, ge=1)

    def to_physical(self) -> PhysicalConfig:
        return PhysicalConfig(
            intra=ProtocolParams(self.intra_attempt_time, self.intra_success_prob),
            cross=ProtocolParams(self.cross_attempt_time, self.cross_success_prob),
            reconfig_delay_ns=self.reconfig_delay,
            attempt_cap=self.attempt_cap,
        )


class SimulationSpec(_Section):
    strategies: List[Strategy] = Field(default_factory=lambda: [Strategy.DYNAMIC, Strategy.STATIC_PROB])
    lookahead_depth: int = Field(0, ge=0)
    cutoff: Cutoff = None
    unlimited_resources: bool = False
    trials: int = Field(DEFAULT_TRIALS, ge=1)
    seed: int = Field(DEFAULT_SEED, ge=0)

    @model_validator(mode="after")
    def _lookahead_needs_strategy(self) -> "SimulationSpec":
        if not self.strategies:
            raise ValueError("at least one strategy is required")
        if self.lookahead_depth and Strategy.DYNAMIC_LOOKAHEAD not in self.strategies:
            raise ValueError("lookahead_depth > 0 needs the dynamic_lookahead strategy")
        return self

    def sim_config(self, strategy: Strategy) -> SimConfig:
        lookahead = strategy is Strategy.DYNAMIC_LOOKAHEAD
        return SimConfig(
            strategy,
            lookahead_depth=self.lookahead_depth if lookahead else 0,
            cutoff_ns=self.cutoff if lookahead else None,
            unlimited_resources=self.unlimited_resources,
            seed=self.seed,
        )


class ExperimentConfig(_Section):
    label: Optional[str] = None
    circuit: CircuitSpec = Field(default_factory=CircuitSpec)
    partition: PartitionSpec = Field(default_factory=PartitionSpec)
    topology: TopologySpec = Field(default_factory=TopologySpec)
    physical: PhysicalSpec = Field(default_factory=PhysicalSpec)
    simulation: SimulationSpec = Field(default_factory=SimulationSpec)
    out_dir: str = OUT_DIR
    emit_events: bool = False
    sweep: Dict[str, List[Any]] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _fits_topology(self) -> "ExperimentConfig":
        k = self.partition.k
        if k is not None and k > self.topology.num_qpus:
            raise ValueError(f"partition.k={k} exceeds the {self.topology.num_qpus} QPUs of the topology")
        return self

    @property
    def parts(self) -> int:
        return self.partition.k or self.topology.num_qpus

    @property
    def circuit_seed(self) -> int:
        return self.simulation.seed if self.circuit.seed is None else self.circuit.seed


def load_config(path: Union[str, Path, None]) -> ExperimentConfig:
    if path is None:
        return ExperimentConfig()
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    return ExperimentConfig.model_validate_json(p.read_text())


def with_overrides(
    cfg: ExperimentConfig,
    *,
    seed: Optional[int] = None,
    trials: Optional[int] = None,
    out_dir: Optional[str] = None,
    emit_events: Optional[bool] = None,
) -> ExperimentConfig:
    """Apply CLI flags; the result is re-validated."""
    data = cfg.model_dump(mode="json")
    if seed is not None:
        data["simulation"]["seed"] = seed
    if trials is not None:
        data["simulation"]["trials"] = trials
    if out_dir is not None:
        data["out_dir"] = out_dir
    if emit_events:
        data["emit_events"] = True
    return ExperimentConfig.model_validate(data)


def _set_path(data: Dict[str, Any], dotted: str, value: Any) -> None:
    *parents, leaf = dotted.split(".")
    node = data
    for key in parents:
        if not isinstance(node.get(key), dict):
            raise ConfigError(f"sweep path '{dotted}' does not name a config field")
        node = node[key]
    if leaf not in node:
        raise ConfigError(f"sweep path '{dotted}' does not name a config field")
    node[leaf] = value


def expand_sweep(cfg: ExperimentConfig) -> List[Tuple[str, ExperimentConfig]]:
    """Cartesian product over ``cfg.sweep``; one validated config per point."""
    if not cfg.sweep:
        return [(cfg.label or cfg.circuit.label, cfg)]
    keys = list(cfg.sweep)
    base = cfg.model_dump(mode="json")
    base["sweep"] = {}
    points = []
    for values in itertools.product(*(cfg.sweep[k] for k in keys)):
        data = json.loads(json.dumps(base))
        for key, value in zip(keys, values):
            _set_path(data, key, value)
        label = ",".join(f"{k}={v}" for k, v in zip(keys, values))
        data["label"] = label
        points.append((label, ExperimentConfig.model_validate(data)))
    return points
