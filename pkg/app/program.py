# app/program.py
"""Distributed program: the dependency DAG of a partitioned circuit with
teleport nodes inserted and every two-qubit node marked local or non-local.

Part ``p`` of a placement runs on QPU ``p``.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from typing import Any, Dict, List, Optional, Tuple

import structlog

from .circuit import Circuit, DependencyDag, Gate, GateKind, Layering, layers
from .errors import PartitionError
from .partition import (
    PartitionCost,
    Partitioner,
    Teleport,
    WindowedPlacement,
    partition_circuit,
)
from .topology import QpuPair, normalize_pair

log = structlog.get_logger("program")


class NodeType(str, Enum):
    GATE = "gate"
    TELEPORT = "teleport"


@dataclass(frozen=True)
class ProgramNode:
    id: int
    type: NodeType
    qubits: Tuple[int, ...]
    window: int
    pair: Optional[QpuPair] = None  # set iff the node needs an EPR pair
    qpu: Optional[int] = None  # host QPU of a local two-qubit gate
    gate: Optional[Gate] = None
    teleport: Optional[Teleport] = None

    @property
    def is_nonlocal(self) -> bool:
        return self.pair is not None

    @property
    def is_two_qubit_gate(self) -> bool:
        return self.gate is not None and self.gate.is_two_qubit

    def to_dict(self) -> Dict[str, Any]:
        out: Dict[str, Any] = {
            "id": self.id,
            "type": self.type.value,
            "qubits": list(self.qubits),
            "window": self.window,
            "pair": list(self.pair) if self.pair else None,
        }
        if self.gate is not None:
            out["kind"] = self.gate.kind.value
            out["gate"] = self.gate.id
        if self.qpu is not None:
            out["qpu"] = self.qpu
        return out


@dataclass(frozen=True, eq=False)
class DistributedProgram:
    circuit: Circuit
    windowed: WindowedPlacement
    nodes: Tuple[ProgramNode, ...]
    dag: DependencyDag

    @cached_property
    def by_id(self) -> Dict[int, ProgramNode]:
        return {n.id: n for n in self.nodes}

    def node(self, node_id: int) -> ProgramNode:
        return self.by_id[node_id]

    @cached_property
    def layering(self) -> Layering:
        return layers(self.dag.copy())

    @property
    def num_qpus(self) -> int:
        if not self.windowed.windows:
            return 0
        return self.windowed.windows[0].placement.k

    def nonlocal_nodes(self) -> List[ProgramNode]:
        return [n for n in self.nodes if n.is_nonlocal]

    def teleport_nodes(self) -> List[ProgramNode]:
        return [n for n in self.nodes if n.type is NodeType.TELEPORT]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "num_qubits": self.circuit.num_qubits,
            "placement": self.windowed.to_dict(),
            "nodes": [n.to_dict() for n in self.nodes],
            "edges": [list(e) for e in self.dag.edges],
        }


def annotate_program(circuit: Circuit, windowed: WindowedPlacement) -> DistributedProgram:
    covered = sorted(gid for w in windowed.windows for gid in w.gates)
    if covered != sorted(circuit.by_id):
        raise PartitionError("windows must cover every gate exactly once")

    next_id = max(circuit.by_id, default=-1) + 1
    nodes: List[ProgramNode] = []
    for index, window in enumerate(windowed.windows):
        for t in sorted((t for t in windowed.teleports if t.window == index), key=lambda t: t.qubit):
            nodes.append(
                ProgramNode(next_id, NodeType.TELEPORT, (t.qubit,), index, normalize_pair(t.src, t.dst), teleport=t)
            )
            next_id += 1
        placement = window.placement
        for gid in window.gates:
            gate = circuit.gate(gid)
            pair = qpu = None
            if gate.is_two_qubit:
                a, b = (placement[q] for q in gate.qubits)
                if a == b:
                    qpu = a
                else:
                    pair = normalize_pair(a, b)
            nodes.append(ProgramNode(gid, NodeType.GATE, gate.qubits, index, pair, qpu, gate=gate))

    dag = DependencyDag.from_ops((n.id, n.qubits) for n in nodes)
    program = DistributedProgram(circuit, windowed, tuple(nodes), dag)
    log.debug(
        "program.annotated",
        nodes=len(nodes),
        nonlocal_nodes=len(program.nonlocal_nodes()),
        teleports=len(windowed.teleports),
    )
    return program


_CONTROL, _TARGET = "control", "target"


def _keeps_run(gate: Gate, qubit: int, role: str) -> bool:
    if role == _CONTROL:
        return gate.kind in (GateKind.RZ, GateKind.CRZ) or (gate.kind is GateKind.CX and gate.control == qubit)
    return gate.kind is GateKind.X or (gate.kind is GateKind.CX and gate.target == qubit)


def gate_pack(circuit: Circuit, program: DistributedProgram) -> PartitionCost:
    """Count EPR charges when runs of non-local gates share one pair.

    A run rides on one qubit ``q`` and one QPU pair. A control run on ``q``
    survives gates diagonal in Z on ``q`` (rz, crz, cx with ``q`` as control);
    a target run survives gates that commute with X on ``q`` (x, cx with ``q``
    as target). Runs never cross a window boundary.
    """
    charges = 0
    nonlocal_gates = 0
    open_runs: Dict[Tuple[int, str, QpuPair], int] = {}
    charge_owner: Dict[int, Tuple[int, str]] = {}
    window = None
    for node in program.nodes:
        if node.type is NodeType.TELEPORT:
            continue
        if node.window != window:
            window = node.window
            open_runs.clear()
        gate = node.gate
        assert gate is not None

        joined = None
        if node.pair is not None:
            nonlocal_gates += 1
            candidates = []
            if gate.kind in (GateKind.CX, GateKind.CRZ):
                candidates.append((gate.control, _CONTROL, node.pair))
            if gate.kind is GateKind.CX:
                candidates.append((gate.target, _TARGET, node.pair))
            joined = next((key for key in candidates if key in open_runs), None)

        for key in [key for key in open_runs if key[0] in gate.qubits]:
            if not _keeps_run(gate, key[0], key[1]):
                del open_runs[key]

        if joined is not None:
            charge = open_runs[joined]
            if charge not in charge_owner:
                charge_owner[charge] = (joined[0], joined[1])
                for key in [k for k, c in open_runs.items() if c == charge and k != joined]:
                    del open_runs[key]
        elif node.pair is not None:
            charge = charges
            charges += 1
            if gate.kind in (GateKind.CX, GateKind.CRZ):
                open_runs[(gate.control, _CONTROL, node.pair)] = charge
            if gate.kind is GateKind.CX:
                open_runs[(gate.target, _TARGET, node.pair)] = charge

    return PartitionCost(nonlocal_gates, charges, len(program.teleport_nodes()))


def partition_cost(program: DistributedProgram, packing: bool = False) -> PartitionCost:
    if packing:
        return gate_pack(program.circuit, program)
    nonlocal_gates = sum(1 for n in program.nodes if n.type is NodeType.GATE and n.is_nonlocal)
    return PartitionCost(nonlocal_gates, nonlocal_gates, len(program.teleport_nodes()))


def compare_partitioners(
    circuit: Circuit,
    k: int,
    capacity: Optional[int] = None,
    window_size: int = 100,
) -> List[Tuple[Partitioner, PartitionCost]]:
    """KL and WBCP unpacked, Opt-WBCP with packing, on one circuit."""
    rows = []
    for method in Partitioner:
        program = annotate_program(circuit, partition_circuit(circuit, method, k, capacity, window_size))
        cost = partition_cost(program, packing=method is Partitioner.OPT_WBCP)
        rows.append((method, cost))
        log.info("partition.cost", method=method.value, total=cost.total, teleports=cost.teleports)
    return rows
