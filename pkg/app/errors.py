# app/errors.py
from __future__ import annotations

from typing import Optional


class QasmSyntaxError(ValueError):
    """Malformed or unsupported QASM input. Carries the 1-based position.

    ``kind`` is one of: syntax, arity, register, range, unsupported.
    """

    def __init__(self, message: str, line: int, column: int, kind: str = "syntax") -> None:
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column
        self.kind = kind
        self.reason = message


class CircuitError(ValueError):
    pass


class TopologyError(ValueError):
    pass


class ReservationError(KeyError):
    """Release of a reservation id the ledger does not hold."""


class ContractViolation(RuntimeError):
    pass


class PartitionError(ValueError):
    pass


class AttemptCapExceeded(RuntimeError):
    def __init__(self, cap: int, success_prob: float) -> None:
        super().__init__(f"no success after {cap} attempts at p={success_prob}")
        self.cap = cap
        self.success_prob = success_prob


class SchedulingStalled(RuntimeError):
    def __init__(self, time_ns: int, blocked: list[int], detail: Optional[str] = None) -> None:
        msg = f"no progress possible at t={time_ns}ns; blocked nodes {blocked[:8]}"
        if detail:
            msg = f"{msg} ({detail})"
        super().__init__(msg)
        self.time_ns = time_ns
        self.blocked = blocked


class ConfigError(ValueError):
    pass
