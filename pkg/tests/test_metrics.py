# tests/test_metrics.py
import csv
import json
import math
from collections import Counter

import numpy as np
import pytest

from app.benchmarks import gen_benchmark
from app.circuit import CircuitBuilder
from app.partition import Placement, partition_circuit, single_window
from app.physical import PhysicalConfig
from app.program import annotate_program
from app.scheduler import EventKind, ScriptedDurations, SimConfig, Strategy, run_dynamic, run_experiment
from app.metrics import (
    bsm_profile,
    delay_stats,
    demand_matrix,
    peak_bsm_requirement,
    provision_from_peaks,
    write_bsm_profile_csv,
    write_delay_stats_csv,
    write_demand_csv,
    write_events_jsonl,
)


def _program(kind="qaoa", n=12, k=4, seed=3, **opts):
    c = gen_benchmark(kind, n, seed=seed, **opts)
    return annotate_program(c, partition_circuit(c, "kl", k))


def _oracle(result):
    """In-use BSMs per switch at each sample, from start/release intervals."""
    starts, releases = {}, {}
    for i, e in enumerate(result.events):
        if e.kind is EventKind.TASK_START:
            starts[e.reservation] = (i, e.switches)
        elif e.kind is EventKind.RELEASE:
            releases[e.reservation] = i
    rows = []
    for s, e in enumerate(result.events):
        if e.kind is not EventKind.SAMPLE:
            continue
        held = Counter()
        for res, (i, switches) in starts.items():
            if i < s < releases.get(res, len(result.events)):
                held.update(switches)
        rows.append(held)
    return rows


def test_demand_matrix_totals_and_diagonal(clos_net):
    program = _program(n=40, edge_prob=0.3)
    report = run_experiment(program, clos_net, PhysicalConfig(), SimConfig(seed=2), 3)
    matrix = demand_matrix(report.results, program)
    assert matrix.counts.shape == (4, 4)
    assert math.isclose(matrix.percent.sum(), 100.0, abs_tol=0.01)
    assert matrix.diagonal_percent > 0.0
    off_diagonal = matrix.percent - np.diag(np.diag(matrix.percent))
    assert matrix.diagonal_percent > off_diagonal.max()
    assert np.allclose(np.tril(matrix.counts, -1), 0)
    mirrored = matrix.mirrored()
    assert np.allclose(mirrored, mirrored.T)


@pytest.mark.parametrize("kind", ["qft", "qv", "bv", "cat", "adder", "ising"])
def test_demand_totals_on_benchmarks(clos_net, kind):
    program = _program(kind, n=8, k=4)
    result = run_dynamic(program, clos_net, PhysicalConfig(), seed=1)
    matrix = demand_matrix([result], program)
    if matrix.total:
        assert math.isclose(matrix.percent.sum(), 100.0, abs_tol=0.01)


def test_bsm_profile_matches_interval_oracle(clos_net):
    program = _program(n=16, k=8)
    result = run_dynamic(program, clos_net, PhysicalConfig(), seed=4, unlimited=True)
    profile = bsm_profile(result)
    expected = _oracle(result)
    assert len(profile) == len(expected) == len(result.bsm_samples)
    for row, held in zip(profile.in_use, expected):
        assert dict(row) == {s: held.get(s, 0) for s, _ in row}


def test_profile_agrees_with_engine_samples(clos_net):
    program = _program(n=12, k=8)
    result = run_dynamic(program, clos_net, PhysicalConfig(), seed=6)
    profile = bsm_profile(result)
    assert list(profile.in_use) == [s.in_use for s in result.bsm_samples]


def test_provisioning_from_peaks_removes_unavailability(clos_net):
    program = _program(n=16, k=8)
    sim = SimConfig(Strategy.DYNAMIC, unlimited_resources=True, seed=9)
    unlimited = run_experiment(program, clos_net, PhysicalConfig(), sim, 3)
    peaks = peak_bsm_requirement(unlimited.results)
    assert peaks.global_max == max(unlimited.peak_bsm.values())

    provisioned = provision_from_peaks(clos_net, unlimited.results)
    limited = run_experiment(
        program, provisioned, PhysicalConfig(), SimConfig(Strategy.DYNAMIC, seed=9), 3
    )
    assert limited.unavailable == 0
    assert list(limited.makespans_ns) == list(unlimited.makespans_ns)


def test_peaks_need_unlimited_runs(clos_net):
    program = _program()
    result = run_dynamic(program, clos_net, PhysicalConfig(), seed=1)
    with pytest.raises(ValueError):
        peak_bsm_requirement([result])


def test_delay_stats_ratio(clos_net):
    program = _program(kind="qft", n=8)
    phys = PhysicalConfig()
    dyn = run_experiment(program, clos_net, phys, SimConfig(Strategy.DYNAMIC, unlimited_resources=True, seed=4), 5)
    static = run_experiment(
        program, clos_net, phys, SimConfig(Strategy.STATIC_PROB, unlimited_resources=True, seed=4), 5
    )
    stats = delay_stats(dyn, static)
    assert stats.dynamic.trials == stats.static.trials == 5
    assert stats.ratio == pytest.approx(dyn.mean_ns / static.mean_ns)
    assert stats.ratio <= 1.0


def test_delay_stats_requires_pairing(clos_net):
    program = _program(kind="cat", n=4, k=2)
    phys = PhysicalConfig()
    a = run_experiment(program, clos_net, phys, SimConfig(seed=1), 2)
    b = run_experiment(program, clos_net, phys, SimConfig(Strategy.STATIC_PROB, seed=2), 2)
    with pytest.raises(ValueError):
        delay_stats(a, b)


def test_delay_stats_rejects_reports_of_different_programs(clos_net):
    phys = PhysicalConfig()
    a = run_experiment(_program(kind="cat", n=4, k=2), clos_net, phys, SimConfig(seed=1), 2)
    b = run_experiment(_program(kind="cat", n=4, k=2), clos_net, phys, SimConfig(Strategy.STATIC_PROB, seed=1), 2)
    with pytest.raises(ValueError):
        delay_stats(a, b)


def test_ratio_under_common_durations(worked_program, clos_net, zero_reconfig):
    # layer 0 takes 1, 5, 2; layer 1 takes 3 (after 0, 1) and 6 (after 0, 2)
    durations = ScriptedDurations({0: 1, 1: 5, 2: 2, 3: 3, 4: 6})
    reports = {
        strategy: run_experiment(
            worked_program,
            clos_net,
            zero_reconfig,
            SimConfig(strategy, unlimited_resources=True),
            1,
            durations_factory=lambda _: durations,
        )
        for strategy in (Strategy.DYNAMIC, Strategy.STATIC_PROB)
    }
    assert reports[Strategy.DYNAMIC].min_ns == 8
    assert reports[Strategy.STATIC_PROB].min_ns == 11
    stats = delay_stats(reports[Strategy.DYNAMIC], reports[Strategy.STATIC_PROB])
    assert stats.ratio == pytest.approx(8 / 11)


def test_profile_counts_gates_sharing_one_aggregation_switch(clos_net, zero_reconfig):
    # rack 0 to rack 2: every route is ToR8 -> agg0 -> ToR10
    c = CircuitBuilder(6).cx(0, 3).cx(1, 4).cx(2, 5).build()
    program = annotate_program(c, single_window(c, Placement((0, 1, 0, 4, 5, 4), 8, 2)))
    durations = ScriptedDurations({0: 5, 1: 5, 2: 5})
    result = run_dynamic(program, clos_net, zero_reconfig, durations, unlimited=True)
    profile = bsm_profile(result)
    agg = clos_net.agg_id(0)
    assert max(dict(row)[agg] for row in profile.in_use) == 3
    assert peak_bsm_requirement([result]).per_switch[agg] == 3


def test_more_qpus_do_not_raise_the_peak(clos_net):
    c = gen_benchmark("qaoa", 40, seed=7)
    phys = PhysicalConfig()
    sim = SimConfig(Strategy.DYNAMIC, unlimited_resources=True, seed=7)
    peaks = {}
    for k in (4, 8):
        program = annotate_program(c, partition_circuit(c, "kl", k))
        report = run_experiment(program, clos_net, phys, sim, 3)
        peaks[k] = peak_bsm_requirement(report.results).global_max
    assert peaks[8] <= peaks[4]


def test_dynamic_to_static_ratio_on_qft(clos_net):
    c = gen_benchmark("qft", 60)
    program = annotate_program(c, partition_circuit(c, "kl", 4))
    phys = PhysicalConfig()
    dyn = run_experiment(program, clos_net, phys, SimConfig(Strategy.DYNAMIC, seed=7), 10)
    static = run_experiment(program, clos_net, phys, SimConfig(Strategy.STATIC_PROB, seed=7), 10)
    assert 0.5 <= delay_stats(dyn, static).ratio <= 0.95


def test_writers(tmp_path, clos_net):
    program = _program(kind="qft", n=6)
    report = run_experiment(program, clos_net, PhysicalConfig(), SimConfig(seed=3), 2)
    first = report.results[0]

    stats_path = write_delay_stats_csv(tmp_path / "delay_stats.csv", [("qft_n6", report)])
    rows = list(csv.reader(stats_path.open()))
    assert rows[0] == ["label", "strategy", "trials", "mean_ns", "std_ns", "min_ns", "max_ns"]
    assert rows[1][:3] == ["qft_n6", "dynamic", "2"]

    demand_rows = list(csv.reader(write_demand_csv(tmp_path / "demand.csv", demand_matrix([first], program)).open()))
    assert demand_rows[0] == ["qpu", "0", "1", "2", "3"]
    assert len(demand_rows) == 5

    profile_rows = list(csv.reader(write_bsm_profile_csv(tmp_path / "bsm.csv", bsm_profile(first), clos_net).open()))
    assert profile_rows[0] == ["sample_index", "time_ns", "switch", "in_use", "max"]
    assert profile_rows[1][2] == "tor0"

    lines = write_events_jsonl(tmp_path / "events.jsonl", first.events).read_text().splitlines()
    assert len(lines) == len(first.events)
    assert json.loads(lines[0])["kind"] == first.events[0].kind.value
