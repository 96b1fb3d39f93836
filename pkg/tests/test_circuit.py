# tests/test_circuit.py
import pytest

from app.benchmarks import gen_benchmark

from app.circuit import (
    Circuit,
    CircuitBuilder,
    Gate,
    GateKind,
    build_dag,
    front_layer,
    layers,
    remove_node,
    two_qubit_gates_per_layer,
)
from app.errors import CircuitError, ContractViolation


def test_worked_example_front_layer(worked_circuit):
    dag = build_dag(worked_circuit)
    assert front_layer(dag) == [0, 1, 2]


def test_worked_example_front_after_removals(worked_circuit):
    dag = build_dag(worked_circuit)
    remove_node(dag, 0)
    remove_node(dag, 1)
    assert front_layer(dag) == [2, 3]
    assert not dag.in_front(4)


def test_worked_example_layers(worked_circuit):
    assert layers(build_dag(worked_circuit)).layers == ((0, 1, 2), (3, 4))
    assert two_qubit_gates_per_layer(worked_circuit) == [3, 2]


def test_qft_parallelism_peaks_in_the_middle_layer():
    # crz(j, k) lands in layer j + k, so layer 19 holds the ten pairs summing to 19
    profile = two_qubit_gates_per_layer(gen_benchmark("qft", 20))
    assert sum(profile) == 190
    assert max(profile) == 10
    assert profile.index(10) == 19
    assert profile[18] == profile[20] == 9
    qaoa = two_qubit_gates_per_layer(gen_benchmark("qaoa", 20, rounds=3, edge_prob=0.3, seed=7))
    assert 0 < max(qaoa) <= 10


def test_edges_follow_last_writer_per_qubit():
    c = CircuitBuilder(3).h(0).cx(0, 1).rz(1, 0.5).cx(1, 2).h(0).build()
    dag = build_dag(c)
    assert dag.edges == [(0, 1), (1, 2), (1, 4), (2, 3)]


def test_remove_outside_front_is_rejected(worked_circuit):
    dag = build_dag(worked_circuit)
    with pytest.raises(ContractViolation):
        dag.remove_node(3)


def test_copy_is_independent(worked_circuit):
    dag = build_dag(worked_circuit)
    other = dag.copy()
    other.remove_node(0)
    assert len(dag) == 5 and len(other) == 4
    assert dag.front_layer() == [0, 1, 2]


def test_generations_limit(worked_circuit):
    dag = build_dag(worked_circuit)
    assert dag.generations(limit=1) == [[0, 1, 2]]
    dag.remove_node(0)
    assert dag.generations() == [[1, 2], [3, 4]]


def test_empty_circuit_has_no_layers():
    dag = build_dag(Circuit(2))
    assert dag.is_empty()
    assert front_layer(dag) == []
    assert len(layers(dag)) == 0


def test_gate_validation():
    with pytest.raises(CircuitError):
        Gate(0, GateKind.CX, (1,))
    with pytest.raises(CircuitError):
        Gate(0, GateKind.CX, (1, 1))
    with pytest.raises(CircuitError):
        Gate(0, GateKind.RZ, (0,))


def test_circuit_rejects_out_of_range_qubits():
    with pytest.raises(CircuitError):
        Circuit(2, (Gate(0, GateKind.CX, (0, 2)),))


def test_circuit_requires_ascending_ids():
    with pytest.raises(CircuitError):
        Circuit(2, (Gate(1, GateKind.H, (0,)), Gate(0, GateKind.H, (1,))))
