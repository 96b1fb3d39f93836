# app/topology.py
"""Clos data-center network: QPUs under ToR switches, aggregation and core
layers, shortest-path routing and the BSM / communication-qubit ledger.

Node ids are integers. QPUs come first (QPU ``i`` has id ``i``, which is also
the partition part it hosts), then ToRs, aggregation switches and cores.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Dict, Iterable, List, Mapping, Optional, Tuple

import networkx as nx
import structlog

from .errors import ReservationError, TopologyError

log = structlog.get_logger("topology")

QpuPair = Tuple[int, int]


class NodeKind(str, Enum):
    QPU = "qpu"
    TOR = "tor"
    AGG = "agg"
    CORE = "core"


class PairClass(str, Enum):
    LOCAL = "local"
    INTRA = "intra"
    CROSS = "cross"


def normalize_pair(a: int, b: int) -> QpuPair:
    return (a, b) if a <= b else (b, a)


@dataclass(frozen=True)
class NetworkNode:
    id: int
    kind: NodeKind
    index: int
    bsm_capacity: int = 0
    comm_qubit_capacity: int = 0
    rack_id: Optional[int] = None

    def __post_init__(self) -> None:
        if self.bsm_capacity < 0 or self.comm_qubit_capacity < 0:
            raise TopologyError(f"node {self.id}: capacities must be >= 0")
        if self.kind is NodeKind.QPU and self.bsm_capacity:
            raise TopologyError(f"QPU {self.id} cannot host BSMs")
        if self.kind is not NodeKind.QPU and self.comm_qubit_capacity:
            raise TopologyError(f"switch {self.id} cannot hold communication qubits")

    @property
    def name(self) -> str:
        return f"{self.kind.value}{self.index}"

    @property
    def is_switch(self) -> bool:
        return self.kind is not NodeKind.QPU


@dataclass(frozen=True)
class ClosShape:
    cores: int
    aggs: int
    racks: int
    qpus_per_rack: int

    @property
    def num_qpus(self) -> int:
        return self.racks * self.qpus_per_rack

    def aggs_for_rack(self, rack: int) -> Tuple[int, ...]:
        if self.aggs < 2:
            return (0,)
        return tuple(sorted({(2 * rack) % self.aggs, (2 * rack + 1) % self.aggs}))


@dataclass(frozen=True)
class Path:
    qpu_a: int
    qpu_b: int
    switches: Tuple[int, ...]
    classification: PairClass

    @property
    def pair(self) -> QpuPair:
        return normalize_pair(self.qpu_a, self.qpu_b)


@dataclass(frozen=True, eq=False)
class Network:
    shape: ClosShape
    nodes: Tuple[NetworkNode, ...]
    graph: nx.Graph
    _paths: Dict[QpuPair, Tuple[int, ...]] = field(default_factory=dict, repr=False, compare=False)

    @property
    def num_qpus(self) -> int:
        return self.shape.num_qpus

    @property
    def qpus(self) -> List[NetworkNode]:
        return [n for n in self.nodes if n.kind is NodeKind.QPU]

    @property
    def switches(self) -> List[NetworkNode]:
        return [n for n in self.nodes if n.is_switch]

    def node(self, node_id: int) -> NetworkNode:
        if not 0 <= node_id < len(self.nodes):
            raise TopologyError(f"unknown node {node_id}")
        return self.nodes[node_id]

    def is_qpu(self, node_id: int) -> bool:
        return 0 <= node_id < self.num_qpus

    def rack_of(self, qpu: int) -> int:
        node = self.node(qpu)
        if node.kind is not NodeKind.QPU:
            raise TopologyError(f"node {qpu} is not a QPU")
        return node.rack_id  # type: ignore[return-value]

    def tor_of_rack(self, rack: int) -> int:
        return self.num_qpus + rack

    def agg_id(self, index: int) -> int:
        return self.num_qpus + self.shape.racks + index

    def core_id(self, index: int) -> int:
        return self.num_qpus + self.shape.racks + self.shape.aggs + index

    def with_capacities(
        self,
        bsm: Optional[Mapping[int, int]] = None,
        comm: Optional[Mapping[int, int]] = None,
    ) -> "Network":
        """Copy of this network with per-node capacities overridden."""
        bsm = bsm or {}
        comm = comm or {}
        nodes = tuple(
            replace(
                n,
                bsm_capacity=bsm.get(n.id, n.bsm_capacity) if n.is_switch else 0,
                comm_qubit_capacity=comm.get(n.id, n.comm_qubit_capacity) if not n.is_switch else 0,
            )
            for n in self.nodes
        )
        return Network(self.shape, nodes, self.graph)


def build_clos(
    cores: int,
    aggs: int,
    racks: int,
    qpus_per_rack: int,
    bsms_per_switch: int,
    comm_qubits_per_qpu: int,
) -> Network:
    counts = {"cores": cores, "aggs": aggs, "racks": racks, "qpus_per_rack": qpus_per_rack}
    bad = [k for k, v in counts.items() if v < 1]
    if bad:
        raise TopologyError(f"counts must be >= 1: {', '.join(bad)}")
    if bsms_per_switch < 0 or comm_qubits_per_qpu < 0:
        raise TopologyError("capacities must be >= 0")

    shape = ClosShape(cores, aggs, racks, qpus_per_rack)
    q = shape.num_qpus
    nodes: List[NetworkNode] = [
        NetworkNode(i, NodeKind.QPU, i, comm_qubit_capacity=comm_qubits_per_qpu, rack_id=i // qpus_per_rack)
        for i in range(q)
    ]
    nodes += [NetworkNode(q + r, NodeKind.TOR, r, bsm_capacity=bsms_per_switch, rack_id=r) for r in range(racks)]
    nodes += [NetworkNode(q + racks + a, NodeKind.AGG, a, bsm_capacity=bsms_per_switch) for a in range(aggs)]
    nodes += [
        NetworkNode(q + racks + aggs + c, NodeKind.CORE, c, bsm_capacity=bsms_per_switch) for c in range(cores)
    ]

    g = nx.Graph()
    g.add_nodes_from(n.id for n in nodes)
    for i in range(q):
        g.add_edge(i, q + i // qpus_per_rack)
    for r in range(racks):
        for a in shape.aggs_for_rack(r):
            g.add_edge(q + r, q + racks + a)
    for a in range(aggs):
        for c in range(cores):
            g.add_edge(q + racks + a, q + racks + aggs + c)
    if not nx.is_connected(g):
        raise TopologyError("network graph is disconnected")

    net = Network(shape, tuple(nodes), g)
    log.debug("clos.built", qpus=q, switches=len(nodes) - q, links=g.number_of_edges())
    return net


def classify_pair(net: Network, qpu_a: int, qpu_b: int) -> PairClass:
    if qpu_a == qpu_b:
        return PairClass.LOCAL
    if net.rack_of(qpu_a) == net.rack_of(qpu_b):
        return PairClass.INTRA
    return PairClass.CROSS


def shortest_path(net: Network, qpu_a: int, qpu_b: int) -> Path:
    """Breadth-first route between two QPUs, neighbours visited by ascending id.

    The route of an unordered pair is searched from its lower id; asking for
    the reverse direction returns the same switches reversed.
    """
    if not (net.is_qpu(qpu_a) and net.is_qpu(qpu_b)):
        raise TopologyError(f"({qpu_a}, {qpu_b}) is not a pair of QPUs")
    if qpu_a == qpu_b:
        raise TopologyError(f"QPU {qpu_a} has no path to itself")
    key = normalize_pair(qpu_a, qpu_b)
    switches = net._paths.get(key)
    if switches is None:
        src, dst = key
        parents = dict(nx.bfs_predecessors(net.graph, src, sort_neighbors=sorted))
        if dst not in parents:
            raise TopologyError(f"QPUs {src} and {dst} are disconnected")
        hops = []
        cur = parents[dst]
        while cur != src:
            hops.append(cur)
            cur = parents[cur]
        switches = tuple(reversed(hops))
        net._paths[key] = switches
    if qpu_a > qpu_b:
        switches = tuple(reversed(switches))
    return Path(qpu_a, qpu_b, switches, classify_pair(net, qpu_a, qpu_b))


@dataclass(frozen=True)
class Reservation:
    id: int
    qpu_a: int
    qpu_b: int
    switches: Tuple[int, ...]
    reconfigured: bool

    @property
    def pair(self) -> QpuPair:
        return normalize_pair(self.qpu_a, self.qpu_b)


class ResourceLedger:
    """Live BSM and communication-qubit holds for one simulation run.

    With ``unlimited`` set, capacities are never checked but holds and peaks
    are still tracked; that is how congestion-free requirements are measured.
    """

    def __init__(self, net: Network, unlimited: bool = False) -> None:
        self.net = net
        self.unlimited = unlimited
        self._bsm_in_use: Dict[int, int] = {n.id: 0 for n in net.switches}
        self._comm_in_use: Dict[int, int] = {n.id: 0 for n in net.qpus}
        self.peak_bsm: Dict[int, int] = dict(self._bsm_in_use)
        self.peak_comm: Dict[int, int] = dict(self._comm_in_use)
        self.reservations: Dict[int, Reservation] = {}
        self.last_configured: Dict[int, QpuPair] = {}
        self.unavailable = 0
        self._next_id = 0

    def free_bsms(self, switch: int) -> int:
        return self.net.node(switch).bsm_capacity - self._bsm_in_use[switch]

    def free_comm_qubits(self, qpu: int) -> int:
        return self.net.node(qpu).comm_qubit_capacity - self._comm_in_use[qpu]

    def bsm_in_use(self) -> Dict[int, int]:
        return dict(self._bsm_in_use)

    def counters(self) -> Tuple[Tuple[int, ...], Tuple[int, ...]]:
        return tuple(self._bsm_in_use.values()), tuple(self._comm_in_use.values())

    def _fits(self, qpus: Iterable[int], switches: Iterable[int]) -> bool:
        if self.unlimited:
            return True
        return all(self.free_comm_qubits(q) >= 1 for q in qpus) and all(
            self.free_bsms(s) >= 1 for s in switches
        )

    def try_reserve(self, qpu_a: int, qpu_b: int) -> Optional[Reservation]:
        """Hold one comm qubit per endpoint and one BSM per path switch, or
        return None (ledger untouched) when anything is exhausted."""
        path = shortest_path(self.net, qpu_a, qpu_b)
        if not self._fits((qpu_a, qpu_b), path.switches):
            self.unavailable += 1
            log.debug("reserve.unavailable", pair=path.pair, switches=path.switches)
            return None

        pair = path.pair
        reconfigured = any(self.last_configured.get(s) != pair for s in path.switches)
        for s in path.switches:
            self.last_configured[s] = pair
            self._bsm_in_use[s] += 1
            self.peak_bsm[s] = max(self.peak_bsm[s], self._bsm_in_use[s])
        for q in (qpu_a, qpu_b):
            self._comm_in_use[q] += 1
            self.peak_comm[q] = max(self.peak_comm[q], self._comm_in_use[q])

        res = Reservation(self._next_id, qpu_a, qpu_b, path.switches, reconfigured)
        self._next_id += 1
        self.reservations[res.id] = res
        return res

    def release(self, reservation_id: int) -> Reservation:
        try:
            res = self.reservations.pop(reservation_id)
        except KeyError:
            raise ReservationError(f"unknown reservation {reservation_id}") from None
        for s in res.switches:
            self._bsm_in_use[s] -= 1
        for q in (res.qpu_a, res.qpu_b):
            self._comm_in_use[q] -= 1
        return res


def try_reserve(ledger: ResourceLedger, net: Network, qpu_a: int, qpu_b: int) -> Optional[Reservation]:
    if net is not ledger.net:
        raise TopologyError("ledger belongs to a different network")
    return ledger.try_reserve(qpu_a, qpu_b)


def release(ledger: ResourceLedger, reservation_id: int) -> ResourceLedger:
    ledger.release(reservation_id)
    return ledger
