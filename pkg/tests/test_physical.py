# tests/test_physical.py
import numpy as np
import pytest

from app.errors import AttemptCapExceeded, ConfigError
from app.physical import (
    NS_PER_MS,
    NS_PER_US,
    PhysicalConfig,
    ProtocolParams,
    RandomStream,
    expected_generation_time,
    sample_generation,
    sample_generation_time,
)
from app.topology import PairClass

CROSS = ProtocolParams(10 * NS_PER_MS, 0.2)


class ScriptedStream(RandomStream):
    """Replays fixed draws; running past the script is an error."""

    def __init__(self, draws):
        self.key = ("scripted",)
        self._gen = None
        self._buf = np.asarray(list(draws), dtype=float)
        self._pos = 0
        self.consumed = 0

    def _refill(self):
        raise RuntimeError(f"scripted stream exhausted after {self.consumed} draws")


def test_defaults():
    phys = PhysicalConfig()
    assert phys.params_for(PairClass.INTRA) == ProtocolParams(1 * NS_PER_US, 0.5)
    assert phys.params_for(PairClass.CROSS) == CROSS
    assert phys.reconfig_delay_ns == NS_PER_MS
    with pytest.raises(ValueError):
        phys.params_for(PairClass.LOCAL)


def test_invalid_probability():
    with pytest.raises(ConfigError):
        ProtocolParams(1000, 0.0)
    with pytest.raises(ConfigError):
        ProtocolParams(1000, 1.5)


def test_expected_time():
    assert expected_generation_time(CROSS, NS_PER_MS) == 51 * NS_PER_MS
    assert expected_generation_time(ProtocolParams(NS_PER_US, 0.5), 0) == 2 * NS_PER_US


def test_scripted_attempts():
    stream = ScriptedStream([0.9, 0.5, 0.1, 0.9])
    assert sample_generation(CROSS, NS_PER_MS, stream) == (31 * NS_PER_MS, 3)
    assert stream.consumed == 3


def test_certain_success_takes_one_attempt():
    stream = RandomStream(5)
    assert sample_generation_time(ProtocolParams(NS_PER_US, 1.0), 0, stream) == NS_PER_US
    assert stream.consumed == 1


def test_scripted_stream_exhaustion():
    with pytest.raises(RuntimeError):
        ScriptedStream([]).uniform()
    stream = ScriptedStream([0.9])
    stream.uniform()
    with pytest.raises(RuntimeError):
        stream.uniform()


def test_attempt_cap():
    with pytest.raises(AttemptCapExceeded):
        ScriptedStream([0.9] * 5).attempts_until_success(0.2, cap=3)


def test_streams_are_keyed():
    a = RandomStream(7, trial=2, node=3, generation=1)
    b = RandomStream(7, trial=2, node=3, generation=1)
    assert [a.attempts_until_success(0.2) for _ in range(20)] == [b.attempts_until_success(0.2) for _ in range(20)]


def test_uniform_matches_attempt_counting():
    a = RandomStream(3)
    draws = [a.uniform() for _ in range(600)]
    b = RandomStream(3)
    counted = []
    while b.consumed < 500:
        counted.append(b.attempts_until_success(0.3))
    expected = []
    k = 0
    for u in draws[: b.consumed]:
        k += 1
        if u < 0.3:
            expected.append(k)
            k = 0
    assert counted == expected


def test_monte_carlo_mean_matches_expectation():
    stream = RandomStream(11)
    samples = np.array([sample_generation_time(CROSS, NS_PER_MS, stream) for _ in range(100_000)])
    assert abs(samples.mean() - 51 * NS_PER_MS) <= 0.02 * 51 * NS_PER_MS
