# app/physical.py
"""Timing model for heralded entanglement generation.

All durations are integer nanoseconds. Each attempt succeeds independently
with the protocol's probability; a generation costs the optional switch
reconfiguration delay plus one attempt time per attempt up to and including
the first success.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from .errors import AttemptCapExceeded, ConfigError
from .topology import PairClass

NS_PER_US = 1_000
NS_PER_MS = 1_000_000
NS_PER_S = 1_000_000_000

DEFAULT_ATTEMPT_CAP = 10**7
_BLOCK = 256


@dataclass(frozen=True)
class ProtocolParams:
    attempt_time_ns: int
    success_prob: float

    def __post_init__(self) -> None:
        if self.attempt_time_ns <= 0:
            raise ConfigError(f"attempt time must be > 0 ns, got {self.attempt_time_ns}")
        if not 0.0 < self.success_prob <= 1.0:
            raise ConfigError(f"success probability must lie in (0, 1], got {self.success_prob}")


@dataclass(frozen=True)
class PhysicalConfig:
    intra: ProtocolParams = field(default_factory=lambda: ProtocolParams(1 * NS_PER_US, 0.5))
    cross: ProtocolParams = field(default_factory=lambda: ProtocolParams(10 * NS_PER_MS, 0.2))
    reconfig_delay_ns: int = 1 * NS_PER_MS
    attempt_cap: int = DEFAULT_ATTEMPT_CAP

    def __post_init__(self) -> None:
        if self.reconfig_delay_ns < 0:
            raise ConfigError("reconfiguration delay must be >= 0")
        if self.attempt_cap < 1:
            raise ConfigError("attempt cap must be >= 1")

    def params_for(self, pair_class: PairClass) -> ProtocolParams:
        if pair_class is PairClass.INTRA:
            return self.intra
        if pair_class is PairClass.CROSS:
            return self.cross
        raise ValueError("local pairs need no entanglement")


class RandomStream:
    """Uniform draws keyed by (seed, trial, node, generation).

    The key feeds a ``SeedSequence`` driving a counter-based Philox
    generator, so a key always yields the same sequence no matter what other
    streams were drawn before it.
    """

    def __init__(self, seed: int, trial: int = 0, node: int = 0, generation: int = 0) -> None:
        self.key = (seed, trial, node, generation)
        self._gen: Optional[np.random.Generator] = np.random.Generator(
            np.random.Philox(np.random.SeedSequence([seed, trial, node, generation]))
        )
        self._buf = np.empty(0)
        self._pos = 0
        self.consumed = 0

    def _refill(self) -> None:
        assert self._gen is not None
        self._buf = self._gen.random(_BLOCK)
        self._pos = 0

    def uniform(self) -> float:
        if self._pos >= len(self._buf):
            self._refill()
        value = float(self._buf[self._pos])
        self._pos += 1
        self.consumed += 1
        return value

    def attempts_until_success(self, success_prob: float, cap: int = DEFAULT_ATTEMPT_CAP) -> int:
        """Index of the first draw below ``success_prob``; consumes exactly that many draws."""
        k = 0
        while True:
            if self._pos >= len(self._buf):
                self._refill()
            chunk = self._buf[self._pos:]
            hits = np.flatnonzero(chunk < success_prob)
            if hits.size:
                step = int(hits[0]) + 1
            else:
                step = len(chunk)
            k += step
            self._pos += step
            self.consumed += step
            if k > cap:
                raise AttemptCapExceeded(cap, success_prob)
            if hits.size:
                return k


def sample_generation(
    params: ProtocolParams,
    reconfig_ns: int,
    stream: RandomStream,
    cap: int = DEFAULT_ATTEMPT_CAP,
) -> Tuple[int, int]:
    """Returns (duration_ns, attempts)."""
    attempts = stream.attempts_until_success(params.success_prob, cap)
    return reconfig_ns + attempts * params.attempt_time_ns, attempts


def sample_generation_time(
    params: ProtocolParams,
    reconfig_ns: int,
    stream: RandomStream,
    cap: int = DEFAULT_ATTEMPT_CAP,
) -> int:
    return sample_generation(params, reconfig_ns, stream, cap)[0]


def expected_generation_time(params: ProtocolParams, reconfig_ns: int) -> int:
    if params.success_prob <= 0:
        raise ConfigError("success probability must be > 0")
    return reconfig_ns + int(round(params.attempt_time_ns / params.success_prob))
