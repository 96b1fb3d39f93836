# tests/test_config.py
import json

import pytest
from pydantic import ValidationError

from app.config import (
    ExperimentConfig,
    expand_sweep,
    load_config,
    parse_duration,
    with_overrides,
)
from app.errors import ConfigError
from app.physical import NS_PER_MS, NS_PER_US
from app.scheduler import Strategy


def test_defaults_follow_the_reference_setup():
    cfg = ExperimentConfig()
    assert cfg.topology.num_qpus == 8
    assert cfg.parts == 8
    phys = cfg.physical.to_physical()
    assert phys.intra.attempt_time_ns == NS_PER_US
    assert phys.cross.success_prob == 0.2
    assert phys.reconfig_delay_ns == NS_PER_MS
    assert cfg.simulation.trials == 100
    net = cfg.topology.to_network()
    assert net.node(net.agg_id(0)).bsm_capacity == 5


@pytest.mark.parametrize(
    "value, expected",
    [(1500, 1500), ("10ms", 10 * NS_PER_MS), ("1us", NS_PER_US), ("2s", 2_000_000_000), (3.0, 3)],
)
def test_parse_duration(value, expected):
    assert parse_duration(value) == expected


@pytest.mark.parametrize("value", ["fast", "10 lightyears", 1.5, True])
def test_parse_duration_rejects(value):
    with pytest.raises(ValueError):
        parse_duration(value)


def test_zero_probability_is_invalid():
    with pytest.raises(ValidationError):
        ExperimentConfig.model_validate({"physical": {"cross_success_prob": 0}})


def test_unknown_fields_are_rejected():
    with pytest.raises(ValidationError):
        ExperimentConfig.model_validate({"topology": {"spines": 3}})


def test_cutoff_accepts_infinity_and_durations():
    sim = ExperimentConfig.model_validate(
        {"simulation": {"strategies": ["dynamic_lookahead"], "lookahead_depth": 2, "cutoff": "inf"}}
    ).simulation
    assert sim.cutoff is None
    sim = ExperimentConfig.model_validate(
        {"simulation": {"strategies": ["dynamic_lookahead"], "lookahead_depth": 2, "cutoff": "5ms"}}
    ).simulation
    cfg = sim.sim_config(Strategy.DYNAMIC_LOOKAHEAD)
    assert cfg.cutoff_ns == 5 * NS_PER_MS
    assert cfg.lookahead_depth == 2


def test_lookahead_needs_its_strategy():
    with pytest.raises(ValidationError):
        ExperimentConfig.model_validate({"simulation": {"lookahead_depth": 1}})


def test_parts_must_fit_topology():
    with pytest.raises(ValidationError):
        ExperimentConfig.model_validate({"partition": {"k": 9}})


def test_load_config_and_overrides(tmp_path):
    path = tmp_path / "exp.json"
    path.write_text(json.dumps({"circuit": {"kind": "qft", "n": 6}, "simulation": {"trials": 3}}))
    cfg = with_overrides(load_config(path), seed=11, trials=2, out_dir=str(tmp_path / "o"), emit_events=True)
    assert cfg.circuit.kind.value == "qft"
    assert cfg.simulation.seed == 11
    assert cfg.simulation.trials == 2
    assert cfg.emit_events
    assert cfg.circuit_seed == 11


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.json")


def test_expand_sweep_is_cartesian():
    cfg = ExperimentConfig.model_validate(
        {"sweep": {"physical.cross_success_prob": [0.2, 0.4], "circuit.n": [8, 12, 16]}}
    )
    points = expand_sweep(cfg)
    assert len(points) == 6
    labels = [label for label, _ in points]
    assert labels[0] == "physical.cross_success_prob=0.2,circuit.n=8"
    assert points[-1][1].physical.cross_success_prob == 0.4
    assert points[-1][1].circuit.n == 16
    assert all(not c.sweep for _, c in points)


def test_sweep_path_must_exist():
    cfg = ExperimentConfig.model_validate({"sweep": {"physical.nonsense": [1]}})
    with pytest.raises(ConfigError):
        expand_sweep(cfg)


def test_sweep_values_are_validated():
    cfg = ExperimentConfig.model_validate({"sweep": {"physical.cross_success_prob": [0.0]}})
    with pytest.raises(ValidationError):
        expand_sweep(cfg)
