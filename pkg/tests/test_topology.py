# tests/test_topology.py
import pytest

from app.errors import ReservationError, TopologyError
from app.topology import (
    NodeKind,
    PairClass,
    ResourceLedger,
    build_clos,
    classify_pair,
    release,
    shortest_path,
    try_reserve,
)


def test_clos_node_layout(clos_net):
    assert clos_net.num_qpus == 8
    assert [n.kind for n in clos_net.nodes].count(NodeKind.TOR) == 4
    assert [n.kind for n in clos_net.nodes].count(NodeKind.AGG) == 4
    assert [n.kind for n in clos_net.nodes].count(NodeKind.CORE) == 2
    assert clos_net.tor_of_rack(0) == 8
    assert clos_net.agg_id(0) == 12
    assert clos_net.core_id(1) == 17
    assert clos_net.node(12).name == "agg0"


def test_every_rack_reaches_two_aggs(clos_net):
    for rack in range(4):
        tor = clos_net.tor_of_rack(rack)
        aggs = [v for v in clos_net.graph.neighbors(tor) if clos_net.node(v).kind is NodeKind.AGG]
        assert len(aggs) == 2


def test_classify_pairs(clos_net):
    assert classify_pair(clos_net, 3, 3) is PairClass.LOCAL
    assert classify_pair(clos_net, 0, 1) is PairClass.INTRA
    assert classify_pair(clos_net, 0, 2) is PairClass.CROSS


def test_intra_rack_path_is_the_tor(clos_net):
    path = shortest_path(clos_net, 0, 1)
    assert path.switches == (8,)
    assert path.classification is PairClass.INTRA


def test_path_through_shared_aggregation(clos_net):
    # racks 0 and 2 hang off the same aggregation pair
    assert shortest_path(clos_net, 0, 4).switches == (8, 12, 10)


def test_path_through_core(clos_net):
    assert shortest_path(clos_net, 0, 2).switches == (8, 12, 16, 14, 9)


def test_reverse_path_is_mirrored(clos_net):
    assert shortest_path(clos_net, 2, 0).switches == (9, 14, 16, 12, 8)


def test_path_to_self_is_rejected(clos_net):
    with pytest.raises(TopologyError):
        shortest_path(clos_net, 1, 1)


def test_bad_counts():
    with pytest.raises(TopologyError):
        build_clos(0, 4, 4, 2, 5, 2)
    with pytest.raises(TopologyError):
        build_clos(2, 4, 4, 2, -1, 2)


def test_comm_qubits_limit_reservations(clos_net):
    ledger = ResourceLedger(clos_net)
    assert ledger.try_reserve(0, 1) is not None
    assert ledger.try_reserve(0, 1) is not None
    before = ledger.counters()
    assert ledger.try_reserve(0, 1) is None
    assert ledger.counters() == before
    assert ledger.unavailable == 1


def test_bsm_limit_reservations():
    net = build_clos(2, 4, 4, 2, bsms_per_switch=1, comm_qubits_per_qpu=2)
    ledger = ResourceLedger(net)
    first = try_reserve(ledger, net, 0, 1)
    assert first is not None
    assert try_reserve(ledger, net, 0, 1) is None
    release(ledger, first.id)
    assert ledger.free_bsms(8) == 1
    assert ledger.free_comm_qubits(0) == 2


def test_reconfiguration_tracks_last_pair(clos_net):
    ledger = ResourceLedger(clos_net)
    a = ledger.try_reserve(0, 1)
    assert a.reconfigured
    ledger.release(a.id)
    b = ledger.try_reserve(1, 0)
    assert not b.reconfigured
    ledger.release(b.id)
    assert ledger.try_reserve(0, 4).reconfigured


def test_release_unknown_reservation(clos_net):
    with pytest.raises(ReservationError):
        ResourceLedger(clos_net).release(42)


def test_unlimited_mode_tracks_peaks(clos_net):
    ledger = ResourceLedger(clos_net, unlimited=True)
    for _ in range(4):
        assert ledger.try_reserve(0, 1) is not None
    assert ledger.peak_bsm[8] == 4
    assert ledger.peak_comm[0] == 4
    assert ledger.unavailable == 0


def test_with_capacities_overrides(clos_net):
    net = clos_net.with_capacities(bsm={8: 9}, comm={0: 3})
    assert net.node(8).bsm_capacity == 9
    assert net.node(9).bsm_capacity == 5
    assert net.node(0).comm_qubit_capacity == 3
