# app/partition.py
"""Qubit-to-QPU partitioning.

* ``kl_partition``: k-way Kernighan-Lin by recursive bisection, finished by a
  k-way swap/move sweep so no single swap or move lowers the cut.
* ``wbcp_partition``: fixed-size gate windows, each partitioned from the
  previous window's placement; qubits whose part changes between windows are
  teleported at the boundary.
* ``boundary_refine``: pulls gates that are local from the head of each
  window back into the window before it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np
import structlog

from .circuit import Circuit, Gate
from .errors import PartitionError

log = structlog.get_logger("partition")

InteractionGraph = nx.Graph


class Partitioner(str, Enum):
    KL = "kl"
    WBCP = "wbcp"
    OPT_WBCP = "opt_wbcp"


@dataclass(frozen=True)
class Placement:
    assignment: Tuple[int, ...]
    k: int
    capacity: int

    def __post_init__(self) -> None:
        sizes = [0] * self.k
        for q, part in enumerate(self.assignment):
            if not 0 <= part < self.k:
                raise PartitionError(f"qubit {q} mapped to part {part}, outside 0..{self.k - 1}")
            sizes[part] += 1
        over = [p for p, s in enumerate(sizes) if s > self.capacity]
        if over:
            raise PartitionError(f"parts {over} exceed capacity {self.capacity}")

    def __getitem__(self, qubit: int) -> int:
        return self.assignment[qubit]

    def __len__(self) -> int:
        return len(self.assignment)

    def parts(self) -> List[List[int]]:
        out: List[List[int]] = [[] for _ in range(self.k)]
        for q, part in enumerate(self.assignment):
            out[part].append(q)
        return out

    def sizes(self) -> List[int]:
        return [len(p) for p in self.parts()]

    def is_local(self, gate: Gate) -> bool:
        return len({self.assignment[q] for q in gate.qubits}) == 1


@dataclass(frozen=True)
class Window:
    gates: Tuple[int, ...]
    placement: Placement


@dataclass(frozen=True)
class Teleport:
    qubit: int
    src: int
    dst: int
    window: int  # moves happen just before this window starts


@dataclass(frozen=True)
class WindowedPlacement:
    windows: Tuple[Window, ...]
    teleports: Tuple[Teleport, ...]

    @classmethod
    def from_windows(cls, windows: Sequence[Window]) -> "WindowedPlacement":
        return cls(tuple(windows), tuple(diff_teleports(windows)))

    @property
    def num_windows(self) -> int:
        return len(self.windows)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "windows": [
                {"gates": list(w.gates), "placement": list(w.placement.assignment)} for w in self.windows
            ],
            "teleports": [
                {"qubit": t.qubit, "from": t.src, "to": t.dst, "before_window": t.window}
                for t in self.teleports
            ],
        }


@dataclass(frozen=True)
class PartitionCost:
    nonlocal_gates: int
    packed_epr: int
    teleports: int

    def __post_init__(self) -> None:
        if min(self.nonlocal_gates, self.packed_epr, self.teleports) < 0:
            raise PartitionError("costs are counts and cannot be negative")
        if self.packed_epr > self.nonlocal_gates:
            raise PartitionError("packing cannot add EPR pairs")

    @property
    def total(self) -> int:
        return self.packed_epr + self.teleports


def interaction_graph(circuit: Circuit, gates: Optional[Iterable[Gate]] = None) -> InteractionGraph:
    """Qubits as nodes; edge weight = number of two-qubit gates on that pair."""
    g = nx.Graph()
    g.add_nodes_from(range(circuit.num_qubits))
    for gate in circuit.gates if gates is None else gates:
        if not gate.is_two_qubit:
            continue
        a, b = gate.qubits
        if g.has_edge(a, b):
            g[a][b]["weight"] += 1
        else:
            g.add_edge(a, b, weight=1)
    return g


def cut_weight(graph: InteractionGraph, placement: Placement) -> int:
    return sum(
        int(d.get("weight", 1)) for a, b, d in graph.edges(data=True) if placement[a] != placement[b]
    )


def _kl_bisect(w: np.ndarray, left: np.ndarray) -> np.ndarray:
    """Kernighan-Lin passes on a two-way split until a pass finds no gain.

    ``left`` is a boolean mask over the nodes of ``w``; sizes never change.
    """
    left = left.copy()
    while True:
        sign = np.where(left, 1.0, -1.0)
        d = -(w @ sign) * sign  # external minus internal weight
        a_nodes = np.flatnonzero(left)
        b_nodes = np.flatnonzero(~left)
        steps = min(len(a_nodes), len(b_nodes))
        if steps == 0:
            return left
        locked_a = np.zeros(len(a_nodes), dtype=bool)
        locked_b = np.zeros(len(b_nodes), dtype=bool)
        gains: List[float] = []
        swaps: List[Tuple[int, int]] = []
        cross = w[np.ix_(a_nodes, b_nodes)]
        for _ in range(steps):
            g = d[a_nodes][:, None] + d[b_nodes][None, :] - 2.0 * cross
            g[locked_a, :] = -np.inf
            g[:, locked_b] = -np.inf
            i, j = np.unravel_index(int(np.argmax(g)), g.shape)
            a, b = int(a_nodes[i]), int(b_nodes[j])
            gains.append(float(g[i, j]))
            swaps.append((a, b))
            locked_a[i] = True
            locked_b[j] = True
            delta = 2.0 * (w[:, a] - w[:, b])
            d[a_nodes] += delta[a_nodes]
            d[b_nodes] -= delta[b_nodes]
        cumulative = np.cumsum(gains)
        best = int(np.argmax(cumulative))
        if cumulative[best] <= 0.5:
            return left
        for a, b in swaps[: best + 1]:
            left[a] = False
            left[b] = True


def _refine(w: np.ndarray, assign: np.ndarray, k: int, capacity: int) -> np.ndarray:
    """Apply the best single swap or single move until neither lowers the cut."""
    n = len(assign)
    assign = assign.copy()
    if n < 2:
        return assign
    upper = np.triu(np.ones((n, n), dtype=bool), 1)
    while True:
        onehot = np.zeros((n, k))
        onehot[np.arange(n), assign] = 1.0
        to_part = w @ onehot
        own = to_part[np.arange(n), assign]
        sizes = onehot.sum(axis=0)

        to_other = to_part[:, assign]
        swap = to_other - own[:, None] + to_other.T - own[None, :] - 2.0 * w
        swap[~upper | (assign[:, None] == assign[None, :])] = -np.inf
        u, v = np.unravel_index(int(np.argmax(swap)), swap.shape)
        swap_gain = swap[u, v]

        move = to_part - own[:, None]
        move[np.arange(n), assign] = -np.inf
        move[:, sizes >= capacity] = -np.inf
        q, p = np.unravel_index(int(np.argmax(move)), move.shape)
        move_gain = move[q, p]

        if max(swap_gain, move_gain) <= 0.5:
            return assign
        if swap_gain >= move_gain:
            assign[u], assign[v] = assign[v], assign[u]
        else:
            assign[q] = p


def kl_partition(
    graph: InteractionGraph,
    k: int,
    capacity: Optional[int] = None,
    warm_start: Optional[Placement] = None,
) -> Placement:
    """Balanced k-way placement of the graph's nodes ``0..n-1``.

    Without ``warm_start`` each bisection starts from ascending index halves;
    with it, from the given placement.
    """
    n = graph.number_of_nodes()
    if sorted(graph.nodes) != list(range(n)):
        raise PartitionError("interaction graph nodes must be 0..n-1")
    if k < 1:
        raise PartitionError("k must be >= 1")
    cap = max(1, math.ceil(n / k)) if capacity is None else capacity
    if cap < 0 or k * cap < n:
        raise PartitionError(f"{n} qubits do not fit in {k} parts of capacity {cap}")
    if warm_start is not None and (len(warm_start) != n or warm_start.k != k):
        raise PartitionError("warm start does not match the graph")
    if k == 1:
        return Placement((0,) * n, 1, cap)

    w = nx.to_numpy_array(graph, nodelist=list(range(n)), weight="weight")
    assign = np.zeros(n, dtype=int)

    def bisect(nodes: np.ndarray, part_ids: List[int]) -> None:
        if len(part_ids) == 1:
            assign[nodes] = part_ids[0]
            return
        half = math.ceil(len(part_ids) / 2)
        left_ids, right_ids = part_ids[:half], part_ids[half:]
        size = min(cap * len(left_ids), math.ceil(len(nodes) * len(left_ids) / len(part_ids)))
        size = max(size, len(nodes) - cap * len(right_ids))
        left = np.arange(len(nodes)) < size
        if warm_start is not None:
            # warm labels only rank nodes; the split size stays balanced
            preferred = np.array([warm_start[int(v)] in left_ids for v in nodes], dtype=bool)
            order = np.argsort(~preferred, kind="stable")
            left = np.zeros(len(nodes), dtype=bool)
            left[order[:size]] = True
        if len(nodes):
            left = _kl_bisect(w[np.ix_(nodes, nodes)], left)
        bisect(nodes[left], left_ids)
        bisect(nodes[~left], right_ids)

    bisect(np.arange(n), list(range(k)))
    assign = _refine(w, assign, k, cap)
    return Placement(tuple(int(p) for p in assign), k, cap)


def static_cost(circuit: Circuit, placement: Placement) -> PartitionCost:
    nonlocal_gates = sum(1 for g in circuit.gates if g.is_two_qubit and not placement.is_local(g))
    return PartitionCost(nonlocal_gates, nonlocal_gates, 0)


def diff_teleports(windows: Sequence[Window]) -> List[Teleport]:
    out: List[Teleport] = []
    for i in range(1, len(windows)):
        before, after = windows[i - 1].placement, windows[i].placement
        out += [
            Teleport(q, before[q], after[q], i) for q in range(len(after)) if before[q] != after[q]
        ]
    return out


def single_window(circuit: Circuit, placement: Placement) -> WindowedPlacement:
    if not circuit.gates:
        return WindowedPlacement((), ())
    return WindowedPlacement.from_windows([Window(tuple(g.id for g in circuit.gates), placement)])


def wbcp_partition(
    circuit: Circuit,
    k: int,
    capacity: Optional[int] = None,
    window_size: int = 100,
) -> WindowedPlacement:
    if window_size < 1:
        raise PartitionError("window_size must be >= 1")
    windows: List[Window] = []
    previous: Optional[Placement] = None
    gates = circuit.gates
    for start in range(0, len(gates), window_size):
        chunk = gates[start:start + window_size]
        placement = kl_partition(interaction_graph(circuit, chunk), k, capacity, warm_start=previous)
        windows.append(Window(tuple(g.id for g in chunk), placement))
        previous = placement
        log.debug("partition.window", index=len(windows) - 1, gates=len(chunk))
    result = WindowedPlacement.from_windows(windows)
    log.info("partition.wbcp", windows=result.num_windows, teleports=len(result.teleports))
    return result


def _head_layer(circuit: Circuit, gate_ids: Sequence[int]) -> List[int]:
    touched: set = set()
    head = []
    for gid in gate_ids:
        qubits = circuit.gate(gid).qubits
        if not touched.intersection(qubits):
            head.append(gid)
        touched.update(qubits)
    return head


def boundary_refine(circuit: Circuit, windowed: WindowedPlacement) -> WindowedPlacement:
    """Move gates of each window's first layer that are local under the
    preceding window's placement into that preceding window."""
    windows = list(windowed.windows)
    moved_total = 0
    for i in range(len(windows) - 1):
        current, nxt = windows[i], windows[i + 1]
        moved = [
            gid
            for gid in _head_layer(circuit, nxt.gates)
            if current.placement.is_local(circuit.gate(gid))
        ]
        if not moved:
            continue
        keep = [gid for gid in nxt.gates if gid not in set(moved)]
        windows[i] = Window(current.gates + tuple(moved), current.placement)
        windows[i + 1] = Window(tuple(keep), nxt.placement)
        moved_total += len(moved)
    if not moved_total:
        return windowed
    log.debug("partition.boundary_refined", moved=moved_total)
    return WindowedPlacement.from_windows(windows)


def opt_wbcp_partition(
    circuit: Circuit,
    k: int,
    capacity: Optional[int] = None,
    window_size: int = 100,
) -> WindowedPlacement:
    return boundary_refine(circuit, wbcp_partition(circuit, k, capacity, window_size))


def partition_circuit(
    circuit: Circuit,
    method: Partitioner | str,
    k: int,
    capacity: Optional[int] = None,
    window_size: int = 100,
) -> WindowedPlacement:
    method = Partitioner(method)
    if method is Partitioner.KL:
        return single_window(circuit, kl_partition(interaction_graph(circuit), k, capacity))
    if method is Partitioner.WBCP:
        return wbcp_partition(circuit, k, capacity, window_size)
    return opt_wbcp_partition(circuit, k, capacity, window_size)
