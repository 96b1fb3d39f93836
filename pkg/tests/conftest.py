# tests/conftest.py
import logging

import pytest

from app.circuit import Circuit, CircuitBuilder
from app.logging_setup import configure
from app.partition import Placement, single_window
from app.physical import PhysicalConfig
from app.program import DistributedProgram, annotate_program
from app.topology import Network, build_clos


@pytest.fixture(autouse=True)
def quiet_logs():
    configure(logging.WARNING)
    yield


@pytest.fixture
def worked_circuit() -> Circuit:
    # CNOTs (1,2), (4,3), (6,5) then (1,4), (2,6); qubit 0 stays idle
    return (
        CircuitBuilder(7)
        .cx(1, 2)
        .cx(4, 3)
        .cx(6, 5)
        .cx(1, 4)
        .cx(2, 6)
        .build()
    )


@pytest.fixture
def clos_net() -> Network:
    return build_clos(cores=2, aggs=4, racks=4, qpus_per_rack=2, bsms_per_switch=5, comm_qubits_per_qpu=2)


@pytest.fixture
def worked_program(worked_circuit) -> DistributedProgram:
    # every qubit on its own QPU, so every CNOT is non-local
    placement = Placement(tuple(range(7)), 8, 1)
    return annotate_program(worked_circuit, single_window(worked_circuit, placement))


@pytest.fixture
def zero_reconfig() -> PhysicalConfig:
    return PhysicalConfig(reconfig_delay_ns=0)


@pytest.fixture
def two_window_circuit() -> Circuit:
    # window 0: triangles {0,1,2} and {3,4,5}; window 1: qubit 2 joins {3,4,5}
    b = CircuitBuilder(6)
    for a, c in [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)]:
        b.cx(a, c)
    for a, c in [(2, 3), (2, 4), (2, 5), (3, 4), (4, 5), (3, 5)]:
        b.cx(a, c)
    return b.build()
