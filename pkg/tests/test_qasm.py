# tests/test_qasm.py
import math

import pytest

from app.benchmarks import BenchmarkKind, gen_benchmark
from app.circuit import Circuit, CircuitBuilder, GateKind
from app.errors import QasmSyntaxError
from app.qasm import emit_qasm, parse_qasm


def _shape(c: Circuit):
    return c.num_qubits, [(g.kind, g.qubits, g.param) for g in c.gates]


def test_parse_basic_program():
    text = 'OPENQASM 2.0;\ninclude "qelib1.inc";\nqreg q[3];\ncreg c[3];\nh q[0];\ncx q[0],q[1];\nrz(pi/2) q[2];\n'
    c = parse_qasm(text)
    assert c.num_qubits == 3
    assert [g.kind for g in c.gates] == [GateKind.H, GateKind.CX, GateKind.RZ]
    assert c.gates[1].qubits == (0, 1)
    assert math.isclose(c.gates[2].param, math.pi / 2)


def test_multiple_registers_are_flattened():
    c = parse_qasm("qreg a[2]; qreg b[2]; cx a[1],b[0];")
    assert c.num_qubits == 4
    assert c.gates[0].qubits == (1, 2)


def test_barrier_measure_and_comments_are_dropped():
    c = parse_qasm("qreg q[2]; creg c[2]; // note\nbarrier q[0],q[1];\nh q[0];\nmeasure q[0] -> c[0];")
    assert len(c) == 1


def test_arity_error_reports_line():
    with pytest.raises(QasmSyntaxError) as err:
        parse_qasm("OPENQASM 2.0;\nqreg q[2];\ncx q[0];\n")
    assert err.value.kind == "arity"
    assert err.value.line == 3


def test_out_of_range_qubit():
    with pytest.raises(QasmSyntaxError) as err:
        parse_qasm("qreg q[2];\nh q[5];")
    assert err.value.kind == "range"
    assert err.value.line == 2


def test_undeclared_register():
    with pytest.raises(QasmSyntaxError) as err:
        parse_qasm("qreg q[2]; h r[0];")
    assert err.value.kind == "register"


def test_unsupported_gate():
    with pytest.raises(QasmSyntaxError) as err:
        parse_qasm("qreg q[3]; ccx q[0],q[1],q[2];")
    assert err.value.kind == "unsupported"


def test_missing_semicolon():
    with pytest.raises(QasmSyntaxError):
        parse_qasm("qreg q[2]; h q[0]")


def test_emit_cx():
    text = emit_qasm(CircuitBuilder(2).cx(0, 1).build())
    assert text == "OPENQASM 2.0;\nqreg q[2];\ncx q[0],q[1];\n"


def test_emit_empty_circuit():
    assert emit_qasm(Circuit(3)) == "OPENQASM 2.0;\nqreg q[3];\n"


@pytest.mark.parametrize("kind", [BenchmarkKind.QFT, BenchmarkKind.QAOA, BenchmarkKind.ADDER, BenchmarkKind.WSTATE])
def test_round_trip_preserves_structure(kind):
    c = gen_benchmark(kind, 6, seed=3)
    assert _shape(parse_qasm(emit_qasm(c))) == _shape(c)
