# app/qasm.py
"""Reader and writer for the OPENQASM 2.0 subset the simulator consumes.

Accepted statements: the ``OPENQASM 2.0`` header, ``include``, ``qreg``/``creg``
declarations, the native gates h, x, rz(theta), cx, crz(theta), and
``barrier``/``measure`` (both dropped). Qubits of several ``qreg``s are
flattened in declaration order.
"""
from __future__ import annotations

import bisect
import math
import re
from typing import Dict, List, Optional, Tuple

import structlog

from .circuit import Circuit, CircuitBuilder, GateKind
from .errors import QasmSyntaxError

log = structlog.get_logger("qasm")

_IDENT = r"[a-zA-Z_][a-zA-Z0-9_]*"
_RE_HEADER = re.compile(r"OPENQASM\s+2(\.0)?")
_RE_INCLUDE = re.compile(r'include\s+"[^"]*"')
_RE_REG = re.compile(rf"(qreg|creg)\s+({_IDENT})\s*\[\s*(\d+)\s*\]")
_RE_GATE = re.compile(rf"({_IDENT})\s*(?:\((.*)\))?\s*(.*)", re.S)
_RE_ARG = re.compile(rf"({_IDENT})\s*\[\s*(\d+)\s*\]")
_RE_NUM = re.compile(r"\d+\.?\d*(?:[eE][-+]?\d+)?|\.\d+(?:[eE][-+]?\d+)?")

_GATES = {k.value: k for k in GateKind}


class _Source:
    def __init__(self, text: str) -> None:
        self.text = text
        self._line_starts = [0] + [m.end() for m in re.finditer("\n", text)]

    def position(self, offset: int) -> Tuple[int, int]:
        line = bisect.bisect_right(self._line_starts, offset)
        return line, offset - self._line_starts[line - 1] + 1

    def fail(self, offset: int, message: str, kind: str = "syntax") -> QasmSyntaxError:
        line, col = self.position(offset)
        return QasmSyntaxError(message, line, col, kind)


def _strip_comments(text: str) -> str:
    # keep offsets stable: blank the comment instead of cutting it out
    return re.sub(r"//[^\n]*", lambda m: " " * len(m.group(0)), text)


def _statements(src: _Source, text: str) -> List[Tuple[int, str]]:
    out = []
    start = 0
    for m in re.finditer(";", text):
        stmt = text[start:m.start()]
        stripped = stmt.strip()
        if stripped:
            out.append((start + (len(stmt) - len(stmt.lstrip())), stripped))
        start = m.end()
    tail = text[start:]
    if tail.strip():
        raise src.fail(start + (len(tail) - len(tail.lstrip())), "missing ';' at end of statement")
    return out


class _Angle:
    """Evaluates angle expressions: numbers, pi, + - * / and parentheses."""

    _TOKEN = re.compile(r"\s*(?:(pi)|(\d+\.?\d*(?:[eE][-+]?\d+)?|\.\d+(?:[eE][-+]?\d+)?)|([-+*/()]))")

    def __init__(self, expr: str) -> None:
        self.tokens: List[str] = []
        pos = 0
        expr = expr.rstrip()
        while pos < len(expr):
            m = self._TOKEN.match(expr, pos)
            if not m:
                raise ValueError(f"bad token in angle '{expr[pos:]}'")
            self.tokens.append(m.group(1) or m.group(2) or m.group(3))
            pos = m.end()
        self.i = 0

    def parse(self) -> float:
        value = self._sum()
        if self.i != len(self.tokens):
            raise ValueError("trailing tokens in angle")
        return value

    def _peek(self) -> Optional[str]:
        return self.tokens[self.i] if self.i < len(self.tokens) else None

    def _take(self) -> str:
        tok = self._peek()
        if tok is None:
            raise ValueError("unexpected end of angle")
        self.i += 1
        return tok

    def _sum(self) -> float:
        value = self._product()
        while self._peek() in ("+", "-"):
            op = self._take()
            rhs = self._product()
            value = value + rhs if op == "+" else value - rhs
        return value

    def _product(self) -> float:
        value = self._unary()
        while self._peek() in ("*", "/"):
            op = self._take()
            rhs = self._unary()
            value = value * rhs if op == "*" else value / rhs
        return value

    def _unary(self) -> float:
        if self._peek() in ("+", "-"):
            sign = -1.0 if self._take() == "-" else 1.0
            return sign * self._unary()
        tok = self._take()
        if tok == "(":
            value = self._sum()
            if self._take() != ")":
                raise ValueError("unbalanced parentheses")
            return value
        if tok == "pi":
            return math.pi
        if _RE_NUM.fullmatch(tok):
            return float(tok)
        raise ValueError(f"unexpected '{tok}'")


def parse_qasm(text: str) -> Circuit:
    src = _Source(text)
    body = _strip_comments(text)
    qregs: Dict[str, Tuple[int, int]] = {}
    cregs: Dict[str, int] = {}
    total = 0
    gates: List[Tuple[GateKind, List[int], Optional[float]]] = []

    for offset, stmt in _statements(src, body):
        if _RE_HEADER.fullmatch(stmt) or _RE_INCLUDE.fullmatch(stmt):
            continue
        m = _RE_REG.fullmatch(stmt)
        if m:
            kind, name, size = m.group(1), m.group(2), int(m.group(3))
            if name in qregs or name in cregs:
                raise src.fail(offset, f"register '{name}' declared twice", "register")
            if kind == "qreg":
                qregs[name] = (total, size)
                total += size
            else:
                cregs[name] = size
            continue
        word = re.match(_IDENT, stmt)
        if word and word.group(0) in ("barrier", "measure"):
            continue
        m = _RE_GATE.fullmatch(stmt)
        if not m or not word:
            raise src.fail(offset, f"cannot parse '{stmt}'")
        name, params, args_text = m.group(1), m.group(2), m.group(3).strip()
        gate_kind = _GATES.get(name)
        if gate_kind is None:
            raise src.fail(offset, f"unsupported statement '{name}'", "unsupported")
        param = None
        if gate_kind.parametric:
            if params is None:
                raise src.fail(offset, f"{name} needs an angle", "arity")
            try:
                param = _Angle(params).parse()
            except (ValueError, ZeroDivisionError) as e:
                raise src.fail(offset, f"bad angle '{params}': {e}") from e
        elif params is not None:
            raise src.fail(offset, f"{name} takes no angle", "arity")

        raw_args = [a.strip() for a in args_text.split(",")] if args_text else []
        if len(raw_args) != gate_kind.arity:
            raise src.fail(
                offset, f"{name} takes {gate_kind.arity} qubit(s), got {len(raw_args)}", "arity"
            )
        qubits = []
        for raw in raw_args:
            am = _RE_ARG.fullmatch(raw)
            if not am:
                raise src.fail(offset, f"expected 'reg[index]', got '{raw}'")
            reg, idx = am.group(1), int(am.group(2))
            if reg not in qregs:
                raise src.fail(offset, f"undeclared register '{reg}'", "register")
            base, size = qregs[reg]
            if idx >= size:
                raise src.fail(offset, f"{reg}[{idx}] out of range (size {size})", "range")
            qubits.append(base + idx)
        if len(set(qubits)) != len(qubits):
            raise src.fail(offset, "gate operands must be distinct qubits", "arity")
        gates.append((gate_kind, qubits, param))

    if not qregs:
        raise src.fail(0, "no qreg declared", "register")

    builder = CircuitBuilder(total)
    for gate_kind, qubits, param in gates:
        builder.append(gate_kind, qubits, param)
    circuit = builder.build()
    log.debug("qasm.parsed", qubits=circuit.num_qubits, gates=len(circuit))
    return circuit


def emit_qasm(circuit: Circuit, register: str = "q") -> str:
    lines = ["OPENQASM 2.0;", f"qreg {register}[{circuit.num_qubits}];"]
    for g in circuit.gates:
        operands = ",".join(f"{register}[{q}]" for q in g.qubits)
        if g.param is not None:
            lines.append(f"{g.kind.value}({g.param!r}) {operands};")
        else:
            lines.append(f"{g.kind.value} {operands};")
    return "\n".join(lines) + "\n"
