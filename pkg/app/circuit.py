# app/circuit.py
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, Tuple

import networkx as nx
import structlog

from .errors import CircuitError, ContractViolation

log = structlog.get_logger("circuit")


class GateKind(str, Enum):
    H = "h"
    RZ = "rz"
    X = "x"
    CX = "cx"
    CRZ = "crz"

    @property
    def arity(self) -> int:
        return 2 if self in (GateKind.CX, GateKind.CRZ) else 1

    @property
    def parametric(self) -> bool:
        return self in (GateKind.RZ, GateKind.CRZ)


@dataclass(frozen=True)
class Gate:
    id: int
    kind: GateKind
    qubits: Tuple[int, ...]
    param: Optional[float] = None

    def __post_init__(self) -> None:
        if len(self.qubits) != self.kind.arity:
            raise CircuitError(
                f"gate {self.id}: {self.kind.value} takes {self.kind.arity} qubit(s), got {len(self.qubits)}"
            )
        if len(set(self.qubits)) != len(self.qubits):
            raise CircuitError(f"gate {self.id}: repeated qubit in {self.qubits}")
        if self.kind.parametric and self.param is None:
            raise CircuitError(f"gate {self.id}: {self.kind.value} needs an angle")

    @property
    def is_two_qubit(self) -> bool:
        return self.kind.arity == 2

    @property
    def control(self) -> int:
        return self.qubits[0]

    @property
    def target(self) -> int:
        return self.qubits[-1]


@dataclass(frozen=True)
class Circuit:
    num_qubits: int
    gates: Tuple[Gate, ...] = ()

    def __post_init__(self) -> None:
        if self.num_qubits < 1:
            raise CircuitError("a circuit needs at least one qubit")
        last_id = None
        for g in self.gates:
            if any(q < 0 or q >= self.num_qubits for q in g.qubits):
                raise CircuitError(f"gate {g.id}: qubit index out of range for {self.num_qubits} qubits")
            if last_id is not None and g.id <= last_id:
                raise CircuitError(f"gate ids must ascend in program order ({last_id} then {g.id})")
            last_id = g.id

    def __len__(self) -> int:
        return len(self.gates)

    def __iter__(self) -> Iterator[Gate]:
        return iter(self.gates)

    @cached_property
    def by_id(self) -> Dict[int, Gate]:
        return {g.id: g for g in self.gates}

    def gate(self, gate_id: int) -> Gate:
        return self.by_id[gate_id]


class CircuitBuilder:
    """Appends gates with ascending ids; used by the generators and tests."""

    def __init__(self, num_qubits: int) -> None:
        self.num_qubits = num_qubits
        self._gates: List[Gate] = []

    def append(self, kind: GateKind, qubits: Sequence[int], param: Optional[float] = None) -> "CircuitBuilder":
        self._gates.append(Gate(len(self._gates), kind, tuple(qubits), param))
        return self

    def h(self, q: int) -> "CircuitBuilder":
        return self.append(GateKind.H, (q,))

    def x(self, q: int) -> "CircuitBuilder":
        return self.append(GateKind.X, (q,))

    def rz(self, q: int, theta: float) -> "CircuitBuilder":
        return self.append(GateKind.RZ, (q,), float(theta))

    def cx(self, control: int, target: int) -> "CircuitBuilder":
        return self.append(GateKind.CX, (control, target))

    def crz(self, control: int, target: int, theta: float) -> "CircuitBuilder":
        return self.append(GateKind.CRZ, (control, target), float(theta))

    def build(self) -> Circuit:
        return Circuit(self.num_qubits, tuple(self._gates))


@dataclass(frozen=True)
class Layering:
    layers: Tuple[Tuple[int, ...], ...] = ()

    def __len__(self) -> int:
        return len(self.layers)

    def __iter__(self) -> Iterator[Tuple[int, ...]]:
        return iter(self.layers)

    def __getitem__(self, i: int) -> Tuple[int, ...]:
        return self.layers[i]

    @cached_property
    def index(self) -> Dict[int, int]:
        return {node: i for i, layer in enumerate(self.layers) for node in layer}


@dataclass(frozen=True)
class _Structure:
    graph: nx.DiGraph
    succ: Dict[int, Tuple[int, ...]]
    indegree: Dict[int, int]


class DependencyDag:
    """Precedence DAG over node ids with a live front layer.

    The graph itself is immutable and shared between copies; removal only
    touches the per-copy counters, so a simulation can take a cheap copy.
    """

    def __init__(self, graph: nx.DiGraph) -> None:
        succ = {n: tuple(sorted(graph.successors(n))) for n in graph.nodes}
        indegree = {n: graph.in_degree(n) for n in graph.nodes}
        self._s = _Structure(graph, succ, indegree)
        self._pending: Dict[int, int] = dict(indegree)
        self._front = {n for n, d in indegree.items() if d == 0}
        self._removed = 0

    @classmethod
    def from_ops(cls, ops: Iterable[Tuple[int, Sequence[int]]]) -> "DependencyDag":
        """Build from (node id, qubits) in program order via a last-writer map."""
        g = nx.DiGraph()
        last_on_qubit: Dict[int, int] = {}
        for node, qubits in ops:
            g.add_node(node)
            for q in qubits:
                prev = last_on_qubit.get(q)
                if prev is not None:
                    g.add_edge(prev, node)
                last_on_qubit[q] = node
        return cls(g)

    def copy(self) -> "DependencyDag":
        other = object.__new__(DependencyDag)
        other._s = self._s
        other._pending = dict(self._pending)
        other._front = set(self._front)
        other._removed = self._removed
        return other

    @property
    def graph(self) -> nx.DiGraph:
        return self._s.graph

    @property
    def nodes(self) -> List[int]:
        return sorted(self._s.graph.nodes)

    @property
    def edges(self) -> List[Tuple[int, int]]:
        return sorted(self._s.graph.edges)

    def __len__(self) -> int:
        return len(self._s.succ) - self._removed

    def is_empty(self) -> bool:
        return len(self) == 0

    def __contains__(self, node: int) -> bool:
        return node in self._pending

    def successors(self, node: int) -> Tuple[int, ...]:
        return self._s.succ[node]

    def predecessors(self, node: int) -> List[int]:
        return sorted(self._s.graph.predecessors(node))

    def in_front(self, node: int) -> bool:
        return node in self._front

    def front_layer(self) -> List[int]:
        return sorted(self._front)

    def remove_node(self, node: int) -> List[int]:
        """Retire a front node; returns the successors that just joined the front."""
        if node not in self._front:
            raise ContractViolation(f"node {node} is not in the front layer")
        self._front.discard(node)
        del self._pending[node]
        self._removed += 1
        joined = []
        for s in self._s.succ[node]:
            self._pending[s] -= 1
            if self._pending[s] == 0:
                self._front.add(s)
                joined.append(s)
        return joined

    def generations(self, limit: Optional[int] = None) -> List[List[int]]:
        """ASAP levels of the remaining DAG, front layer first."""
        pending: Dict[int, int] = {}
        current = sorted(self._front)
        out: List[List[int]] = []
        while current and (limit is None or len(out) < limit):
            out.append(current)
            nxt = []
            for n in current:
                for s in self._s.succ[n]:
                    left = pending.get(s, self._pending[s]) - 1
                    pending[s] = left
                    if left == 0:
                        nxt.append(s)
            current = sorted(nxt)
        return out


def build_dag(circuit: Circuit) -> DependencyDag:
    dag = DependencyDag.from_ops((g.id, g.qubits) for g in circuit.gates)
    log.debug("dag.built", nodes=len(dag), edges=dag.graph.number_of_edges())
    return dag


def front_layer(dag: DependencyDag) -> List[int]:
    return dag.front_layer()


def remove_node(dag: DependencyDag, gate_id: int) -> DependencyDag:
    dag.remove_node(gate_id)
    return dag


def layers(dag: DependencyDag) -> Layering:
    return Layering(tuple(tuple(layer) for layer in dag.generations()))


def two_qubit_gates_per_layer(circuit: Circuit) -> List[int]:
    return [
        sum(1 for gid in layer if circuit.gate(gid).is_two_qubit)
        for layer in layers(build_dag(circuit))
    ]
