# app/benchmarks.py
"""Benchmark circuit generators in the native gate set (h, x, rz, cx, crz).

Generators reproduce the gate topology of each family, not a transpiler's
exact output: the scheduler only needs who-talks-to-whom and in what order.
"""
from __future__ import annotations

import math
from enum import Enum
from typing import Optional, Union

import networkx as nx
import numpy as np
import structlog

from .circuit import Circuit, CircuitBuilder
from .errors import CircuitError

log = structlog.get_logger("benchmarks")


class BenchmarkKind(str, Enum):
    QFT = "qft"
    QAOA = "qaoa"
    QV = "qv"
    RANDOM = "random"
    BV = "bv"
    CAT = "cat"
    ADDER = "adder"
    ISING = "ising"
    WSTATE = "wstate"


def _qft(n: int) -> Circuit:
    b = CircuitBuilder(n)
    for j in range(n):
        b.h(j)
        for k in range(j + 1, n):
            b.crz(j, k, math.pi / 2 ** (k - j))
    return b.build()


def _qaoa(n: int, rounds: int, edge_prob: float, seed: int) -> Circuit:
    if n < 2:
        raise CircuitError("qaoa needs at least 2 qubits")
    graph = nx.gnp_random_graph(n, edge_prob, seed=seed)
    rng = np.random.default_rng(seed)
    b = CircuitBuilder(n)
    for _ in range(rounds):
        gamma, beta = rng.uniform(0.0, math.pi, size=2)
        for u, v in sorted(graph.edges):
            b.cx(u, v)
            b.rz(v, 2.0 * gamma)
            b.cx(u, v)
        for q in range(n):
            b.rz(q, math.pi / 2)
            b.h(q)
            b.rz(q, 2.0 * beta)
    return b.build()


def _qv(n: int, depth: int, seed: int) -> Circuit:
    if n < 2:
        raise CircuitError("quantum volume needs at least 2 qubits")
    rng = np.random.default_rng(seed)
    b = CircuitBuilder(n)
    for _ in range(depth):
        perm = rng.permutation(n)
        for i in range(n // 2):
            a, c = int(perm[2 * i]), int(perm[2 * i + 1])
            t1, t2 = rng.uniform(0.0, 2 * math.pi, size=2)
            b.cx(a, c)
            b.rz(c, t1)
            b.cx(c, a)
            b.rz(a, t2)
            b.cx(a, c)
    return b.build()


def _random(n: int, depth: int, seed: int) -> Circuit:
    rng = np.random.default_rng(seed)
    kinds = ["h", "rz", "x", "cx", "crz"] if n >= 2 else ["h", "rz", "x"]
    b = CircuitBuilder(n)
    for _ in range(depth):
        kind = kinds[int(rng.integers(len(kinds)))]
        if kind in ("cx", "crz"):
            a, c = (int(q) for q in rng.choice(n, size=2, replace=False))
            if kind == "cx":
                b.cx(a, c)
            else:
                b.crz(a, c, float(rng.uniform(0.0, 2 * math.pi)))
        else:
            q = int(rng.integers(n))
            if kind == "h":
                b.h(q)
            elif kind == "x":
                b.x(q)
            else:
                b.rz(q, float(rng.uniform(0.0, 2 * math.pi)))
    return b.build()


def _bv(n: int, secret: Optional[str]) -> Circuit:
    if n < 2:
        raise CircuitError("bernstein-vazirani needs a data qubit and an ancilla")
    secret = secret if secret is not None else "1" * (n - 1)
    if len(secret) != n - 1 or set(secret) - {"0", "1"}:
        raise CircuitError(f"secret must be {n - 1} bits of 0/1, got '{secret}'")
    ancilla = n - 1
    b = CircuitBuilder(n)
    for q in range(n):
        b.h(q)
    for q, bit in enumerate(secret):
        if bit == "1":
            b.cx(q, ancilla)
    for q in range(n):
        b.h(q)
    return b.build()


def _cat(n: int) -> Circuit:
    b = CircuitBuilder(n)
    b.h(0)
    for q in range(n - 1):
        b.cx(q, q + 1)
    return b.build()


def _toffoli(b: CircuitBuilder, a: int, c: int, t: int) -> None:
    quarter = math.pi / 4
    b.h(t)
    b.cx(c, t)
    b.rz(t, -quarter)
    b.cx(a, t)
    b.rz(t, quarter)
    b.cx(c, t)
    b.rz(t, -quarter)
    b.cx(a, t)
    b.rz(c, quarter)
    b.rz(t, quarter)
    b.h(t)
    b.cx(a, c)
    b.rz(a, quarter)
    b.rz(c, -quarter)
    b.cx(a, c)


def _adder(n: int) -> Circuit:
    # ripple-carry layout: carry-in, a[0..m), b[0..m), carry-out
    if n < 4 or n % 2:
        raise CircuitError("adder needs an even qubit count >= 4")
    m = (n - 2) // 2
    cin, cout = 0, n - 1
    a = [1 + i for i in range(m)]
    bb = [1 + m + i for i in range(m)]
    b = CircuitBuilder(n)
    carry = [cin] + a[:-1]
    for i in range(m):
        b.cx(a[i], bb[i])
        b.cx(a[i], carry[i])
        _toffoli(b, carry[i], bb[i], a[i])
    b.cx(a[-1], cout)
    for i in reversed(range(m)):
        _toffoli(b, carry[i], bb[i], a[i])
        b.cx(a[i], carry[i])
        b.cx(carry[i], bb[i])
    return b.build()


def _ising(n: int, rounds: int, seed: int) -> Circuit:
    if n < 2:
        raise CircuitError("ising chain needs at least 2 qubits")
    rng = np.random.default_rng(seed)
    b = CircuitBuilder(n)
    for _ in range(rounds):
        coupling, field = rng.uniform(0.0, math.pi, size=2)
        for q in range(n - 1):
            b.cx(q, q + 1)
            b.rz(q + 1, 2.0 * coupling)
            b.cx(q, q + 1)
        for q in range(n):
            b.h(q)
            b.rz(q, 2.0 * field)
            b.h(q)
    return b.build()


def _wstate(n: int) -> Circuit:
    b = CircuitBuilder(n)
    b.x(0)
    for q in range(n - 1):
        theta = 2.0 * math.acos(math.sqrt(1.0 / (n - q)))
        b.rz(q + 1, theta / 2)
        b.cx(q, q + 1)
        b.rz(q + 1, -theta / 2)
        b.cx(q, q + 1)
        b.cx(q + 1, q)
    return b.build()


def gen_benchmark(
    kind: Union[BenchmarkKind, str],
    n: int,
    *,
    seed: int = 0,
    depth: Optional[int] = None,
    rounds: int = 1,
    edge_prob: float = 0.5,
    secret: Optional[str] = None,
) -> Circuit:
    """Build one benchmark circuit; deterministic per (kind, n, options)."""
    try:
        kind = BenchmarkKind(kind)
    except ValueError as e:
        raise CircuitError(f"unknown benchmark '{kind}'") from e
    if n < 1:
        raise CircuitError("benchmarks need n >= 1")
    if rounds < 1:
        raise CircuitError("rounds must be >= 1")
    if not 0.0 <= edge_prob <= 1.0:
        raise CircuitError("edge_prob must lie in [0, 1]")
    if depth is not None and depth < 0:
        raise CircuitError("depth must be >= 0")

    if kind is BenchmarkKind.QFT:
        circuit = _qft(n)
    elif kind is BenchmarkKind.QAOA:
        circuit = _qaoa(n, rounds, edge_prob, seed)
    elif kind is BenchmarkKind.QV:
        circuit = _qv(n, n if depth is None else depth, seed)
    elif kind is BenchmarkKind.RANDOM:
        circuit = _random(n, 10 * n if depth is None else depth, seed)
    elif kind is BenchmarkKind.BV:
        circuit = _bv(n, secret)
    elif kind is BenchmarkKind.CAT:
        circuit = _cat(n)
    elif kind is BenchmarkKind.ADDER:
        circuit = _adder(n)
    elif kind is BenchmarkKind.ISING:
        circuit = _ising(n, rounds, seed)
    else:
        circuit = _wstate(n)

    log.debug("benchmark.generated", kind=kind.value, qubits=n, gates=len(circuit))
    return circuit
