import dataclasses
import random

import pytest

import dispersim as d
from dispersim import DispatchError, InputFile, InputSchedule, Placement

from helpers import diamond_dag, random_instance, single_file, uniform_cluster


def make_profile(dag, cluster, costs):
    return d.profile_execution(dag, cluster, costs)


# ------------------------------------------------------------- small goldens


def test_single_task_reference_file():
    dag = d.TaskDag(["X"], [], {"X": "loc0"})
    cluster = uniform_cluster(1)
    profile = make_profile(dag, cluster, {"X": 5.0})
    report = d.simulate(dag, Placement({"X": 0}), cluster, profile, single_file())
    assert report.makespans == {0: 5.0}
    assert report.activations == [d.Activation("X", 0, 0.0, 5.0, 0)]


def test_chain_across_nodes_pays_transfer():
    dag = d.TaskDag(["A", "B"], [("A", "B", 100_000)], {"A": "loc0"})
    cluster = uniform_cluster(2, p=1.0)
    profile = make_profile(dag, cluster, {"A": 2.0, "B": 3.0})
    report = d.simulate(
        dag, Placement({"A": 0, "B": 1}), cluster, profile, single_file()
    )
    # A runs 0-2, the 100 KB payload takes 1 s, B runs 3-6
    assert report.makespans == {0: 6.0}


def test_fan_in_waits_for_slowest_parent():
    dag = d.TaskDag(
        ["P1", "P2", "C"],
        [("P1", "C", 100_000), ("P2", "C", 100_000)],
        {"P1": "loc0", "P2": "loc0"},
    )
    cluster = uniform_cluster(3, p=0.0)
    profile = make_profile(dag, cluster, {"P1": 4.0, "P2": 7.0, "C": 1.0})
    report = d.simulate(
        dag, Placement({"P1": 0, "P2": 1, "C": 2}), cluster, profile, single_file()
    )
    assert report.makespans == {0: 8.0}


def test_half_size_file_halves_work_and_payload():
    dag = d.TaskDag(["A", "B"], [("A", "B", 100_000)], {"A": "loc0"})
    cluster = uniform_cluster(2, p=0.0, q=1e-5)  # transfer = 1e-5 s/byte
    profile = make_profile(dag, cluster, {"A": 2.0, "B": 3.0})
    schedule = InputSchedule([InputFile(0, 50_000.0, 0.0)])
    report = d.simulate(dag, Placement({"A": 0, "B": 1}), cluster, profile, schedule)
    # work scales to (1, 1.5), the payload to 50 KB -> 0.5 s on the wire
    assert abs(report.makespans[0] - (1.0 + 0.5 + 1.5)) < 1e-12


def test_dnad_pipeline_golden():
    """Ten-file run over a three-speed cluster, makespans pinned exactly.

    The slow head node feeds two busier remote nodes whose capacity-2
    containers saturate mid-pipeline, so these values exercise overload
    rate sharing, same-node shortcuts, and cross-node payload timing.
    """
    dag = d.dnad_fixture()
    nodes = [
        d.Ncp(0, "loc0", 1.0, 2.0, 5.0),
        d.Ncp(1, "loc0", 2.0, 2.0, 5.0),
        d.Ncp(2, "loc0", 4.0, 2.0, 5.0),
    ]
    cluster = d.ClusterModel(nodes, d.LatencyModel.uniform(3, 0.05, 1e-6), home=0)
    costs = {"local_proc": 2.0, "global_fusion": 1.2}
    for i in range(3):
        costs[f"agg{i}"] = 1.0
        costs[f"simple_det{i}"] = 0.8
        costs[f"astute_det{i}"] = 1.6
        costs[f"fusion{i}"] = 0.6
    profile = make_profile(dag, cluster, costs)
    placement = Placement(
        {
            "local_proc": 0,
            "global_fusion": 0,
            "agg0": 1,
            "simple_det0": 1,
            "astute_det0": 1,
            "fusion0": 1,
            "agg1": 1,
            "simple_det1": 2,
            "astute_det1": 2,
            "fusion1": 2,
            "agg2": 2,
            "simple_det2": 2,
            "astute_det2": 2,
            "fusion2": 2,
        }
    )
    schedule = InputSchedule.uniform(10, 100_000.0, 1.0)
    report = d.simulate(dag, placement, cluster, profile, schedule)
    assert report.makespans == {
        0: 5.3,
        1: 6.300000000000002,
        2: 7.300000000000001,
        3: 8.3,
        4: 9.3,
        5: 10.3,
        6: 11.3,
        7: 12.299999999999994,
        8: 13.299999999999994,
        9: 14.299999999999994,
    }
    assert d.validate_trace(report, dag, placement, cluster, profile, schedule) == []


# ----------------------------------------------------------------- invariants


def test_simulation_is_deterministic():
    rng = random.Random(43)
    dag, cluster, profile = random_instance(rng, 10, 4)
    placement, _ = d.wave_random(dag, cluster, seed=9)
    schedule = InputSchedule.uniform(5, 120_000.0, 2.5)
    a = d.simulate(dag, placement, cluster, profile, schedule)
    b = d.simulate(dag, placement, cluster, profile, schedule)
    assert a.makespans == b.makespans
    assert a.activations == b.activations
    assert a.events == b.events
    times = [e.time for e in a.events]
    assert times == sorted(times)


def test_makespan_monotone_in_latency():
    dag = diamond_dag()
    placement = Placement({"A": 0, "B": 1, "C": 2, "D": 0, "E": 1, "F": 2})
    costs = {t: 1.5 for t in dag.tasks}
    last = None
    for p in (0.0, 0.1, 0.5, 2.0):
        cluster = uniform_cluster(3, p=p)
        profile = make_profile(dag, cluster, costs)
        makespan = d.simulate(dag, placement, cluster, profile, single_file()).makespans[0]
        if last is not None:
            assert makespan >= last
        last = makespan
    assert last > 1.5 * 6  # cross-node hops must have cost something


def test_mean_makespan():
    report = d.MakespanReport({0: 2.0, 1: 4.0}, [], [])
    assert report.mean_makespan() == 3.0
    assert report.makespan_rows() == [(0, 2.0), (1, 4.0)]


# ---------------------------------------------------------------- brute force


def test_brute_force_single_node_matches_simulate():
    rng = random.Random(47)
    dag, cluster, profile = random_instance(rng, 5, 1)
    best, makespan = d.brute_force_optimal(dag, cluster, profile, single_file())
    assert set(best.assignment.values()) == {0}
    direct = d.simulate(dag, best, cluster, profile, single_file())
    assert makespan == direct.makespans[0]


def test_brute_force_prefers_fast_node_despite_latency():
    dag = d.TaskDag(["A", "B"], [("A", "B", 100_000)], {"A": "loc0"})
    for p in (0.05, 100.0):
        cluster = uniform_cluster(2, p=p, speed=[1.0, 4.0])
        profile = make_profile(dag, cluster, {"A": 4.0, "B": 4.0})
        best, makespan = d.brute_force_optimal(dag, cluster, profile, single_file())
        # co-locating on the fast node dodges the hop entirely
        assert best.assignment == {"A": 1, "B": 1}
        assert abs(makespan - 2.0) < 1e-12


def test_brute_force_lower_bounds_heuristics():
    rng = random.Random(53)
    dag = diamond_dag()
    cluster = uniform_cluster(3, p=0.08, q=2e-7, speed=[1.0, 1.3, 0.9])
    costs = {t: rng.uniform(1.0, 3.0) for t in dag.tasks}
    profile = make_profile(dag, cluster, costs)
    schedule = single_file()
    _, optimal = d.brute_force_optimal(dag, cluster, profile, schedule)
    heft_placed = d.heft_map(dag, cluster, profile)
    heft_sim = d.simulate(dag, heft_placed, cluster, profile, schedule).makespans[0]
    assert optimal <= heft_sim + 1e-9
    for _ in range(5):
        placed = Placement({t: rng.randrange(3) for t in dag.tasks})
        sim = d.simulate(dag, placed, cluster, profile, schedule).makespans[0]
        assert optimal <= sim + 1e-9


def test_brute_force_rejects_multi_file():
    dag = d.TaskDag(["X"], [], {"X": "loc0"})
    cluster = uniform_cluster(1)
    profile = make_profile(dag, cluster, {"X": 1.0})
    with pytest.raises(DispatchError, match="single-file"):
        d.brute_force_optimal(dag, cluster, profile, InputSchedule.uniform(2, 1e5, 1.0))


def test_brute_force_respects_space_limit():
    dag = diamond_dag()
    cluster = uniform_cluster(3)
    profile = make_profile(dag, cluster, {t: 1.0 for t in dag.tasks})
    with pytest.raises(DispatchError, match="exceeds limit"):
        d.brute_force_optimal(dag, cluster, profile, single_file(), limit=100)


# ----------------------------------------------------------- trace validation


def test_validator_passes_real_runs():
    rng = random.Random(59)
    for _ in range(25):
        dag, cluster, profile = random_instance(rng, 9, 4)
        placement, _ = d.wave_random(dag, cluster, seed=rng.randrange(1000))
        schedule = InputSchedule.uniform(rng.randint(1, 4), 90_000.0, 1.0)
        report = d.simulate(dag, placement, cluster, profile, schedule)
        assert d.validate_trace(report, dag, placement, cluster, profile, schedule) == []


def _chain_run():
    dag = d.TaskDag(["A", "B"], [("A", "B", 100_000)], {"A": "loc0"})
    cluster = uniform_cluster(2, p=1.0)
    profile = make_profile(dag, cluster, {"A": 2.0, "B": 3.0})
    placement = Placement({"A": 0, "B": 1})
    schedule = single_file()
    report = d.simulate(dag, placement, cluster, profile, schedule)
    return report, dag, placement, cluster, profile, schedule


def _tamper(report, task, seq, **changes):
    acts = [
        dataclasses.replace(a, **changes) if (a.task, a.seq) == (task, seq) else a
        for a in report.activations
    ]
    return d.MakespanReport(dict(report.makespans), acts, list(report.events))


def test_validator_flags_early_start():
    report, *ctx = _chain_run()
    # B legitimately starts at 3.0 (A ends 2.0 + 1 s hop); pull it earlier
    bad = _tamper(report, "B", 0, start=2.5)
    cats = {v.category for v in d.validate_trace(bad, *ctx)}
    assert "precedence" in cats


def test_validator_flags_wrong_node():
    report, *ctx = _chain_run()
    bad = _tamper(report, "B", 0, node=0)
    cats = {v.category for v in d.validate_trace(bad, *ctx)}
    assert "assignment" in cats


def test_validator_flags_sequence_inversion():
    dag = d.TaskDag(["X"], [], {"X": "loc0"})
    cluster = uniform_cluster(1)
    profile = make_profile(dag, cluster, {"X": 2.0})
    placement = Placement({"X": 0})
    schedule = InputSchedule.uniform(2, 100_000.0, 0.5)
    report = d.simulate(dag, placement, cluster, profile, schedule)
    bad = _tamper(report, "X", 1, start=1.0)  # seq 0 still running until 2.0
    cats = {v.category for v in d.validate_trace(bad, dag, placement, cluster, profile, schedule)}
    assert "order" in cats


def test_validator_flags_start_before_file():
    dag = d.TaskDag(["X"], [], {"X": "loc0"})
    cluster = uniform_cluster(1)
    profile = make_profile(dag, cluster, {"X": 2.0})
    placement = Placement({"X": 0})
    schedule = InputSchedule([InputFile(0, 100_000.0, 5.0)])
    report = d.simulate(dag, placement, cluster, profile, schedule)
    bad = _tamper(report, "X", 0, start=0.0, end=2.0)
    cats = {v.category for v in d.validate_trace(bad, dag, placement, cluster, profile, schedule)}
    assert "barrier" in cats


def test_validator_flags_ignored_overload():
    # five containers claim full speed on a two-slot node: the spans cannot
    # integrate to their nominal work under the slowed rate profile
    names = [f"t{i}" for i in range(5)]
    dag = d.TaskDag(names, [], {t: "loc0" for t in names})
    cluster = uniform_cluster(1, capacity=2.0, slowdown=3.0)
    profile = make_profile(dag, cluster, {t: 1.0 for t in names})
    placement = Placement({t: 0 for t in names})
    fake = d.MakespanReport(
        {0: 1.0},
        [d.Activation(t, 0, 0.0, 1.0, 0) for t in names],
        [],
    )
    violations = d.validate_trace(fake, dag, placement, cluster, profile, single_file())
    overloads = [v for v in violations if v.category == "overload"]
    assert len(overloads) == 5


def test_validator_flags_wrong_makespan():
    report, *ctx = _chain_run()
    bad = d.MakespanReport({0: 1.0}, list(report.activations), [])
    cats = {v.category for v in d.validate_trace(bad, *ctx)}
    assert cats == {"makespan"}


# ------------------------------------------------------------ schedule checks


def test_schedule_validation():
    with pytest.raises(DispatchError):
        InputSchedule([])
    with pytest.raises(DispatchError, match="sequence"):
        InputSchedule([InputFile(1, 100.0, 0.0)])
    with pytest.raises(DispatchError, match="positive"):
        InputSchedule([InputFile(0, 0.0, 0.0)])
    with pytest.raises(DispatchError, match="non-decreasing"):
        InputSchedule([InputFile(0, 100.0, 2.0), InputFile(1, 100.0, 1.0)])


def test_uniform_schedule():
    schedule = InputSchedule.uniform(3, 100_000.0, 2.0, start=1.0)
    assert len(schedule) == 3
    assert [f.arrival for f in schedule.files] == [1.0, 3.0, 5.0]


def test_simulate_rejects_partial_placement():
    dag = diamond_dag()
    cluster = uniform_cluster(2)
    profile = make_profile(dag, cluster, {t: 1.0 for t in dag.tasks})
    with pytest.raises(DispatchError, match="missing task"):
        d.simulate(dag, Placement({"A": 0}), cluster, profile, single_file())
    bad = Placement({t: 5 for t in dag.tasks})
    with pytest.raises(DispatchError, match="unknown node"):
        d.simulate(dag, bad, cluster, profile, single_file())
