"""Rank-driven list scheduling with earliest-finish-time node selection.

Tasks are prioritized by upward rank (mean execution cost plus the most
expensive downstream chain of mean communication and rank) and then greedily
assigned to the node that finishes them earliest. A node hosts up to its
container capacity of concurrently planned tasks at full speed, so the
availability search looks for the earliest window with a free slot; on
single-slot nodes this reduces to classic insertion-based gap filling, and
with unbounded capacity a task simply starts as soon as its inputs can
arrive.

An optional hard cap bounds how many tasks may be mapped to any single node,
which models per-node deployment limits rather than concurrency.
"""

from __future__ import annotations

import math

from .cluster import ClusterModel, ExecutionProfile, LatencyModel
from .dag import TaskDag, topological_order
from .placement import Placement


class InfeasibleCapError(ValueError):
    """The per-node task cap cannot accommodate the task count."""


def _mean_transfer(latency: LatencyModel, size: float, cache: dict[float, float]) -> float:
    """Mean transfer time of ``size`` bytes over all ordered pairs of distinct nodes."""
    hit = cache.get(size)
    if hit is not None:
        return hit
    n = latency.num_nodes
    if n < 2:
        cache[size] = 0.0
        return 0.0
    total = 0.0
    for i in range(n):
        for j in range(n):
            if i != j:
                total += latency.transfer_time(i, j, size)
    mean = total / (n * (n - 1))
    cache[size] = mean
    return mean


def upward_rank(
    dag: TaskDag,
    profile: ExecutionProfile,
    latency: LatencyModel,
) -> dict[str, float]:
    """Upward rank of every task.

    rank(t) = mean_exec(t) + max over children c of
              (mean_transfer(edge_size(t, c)) + rank(c)),
    with rank(sink) = mean_exec(sink). Means are taken over all nodes for
    execution and over all ordered pairs of distinct nodes for communication,
    so the rank is placement-independent. Ranks strictly decrease along
    every edge because execution estimates are positive.
    """
    cache: dict[float, float] = {}
    ranks: dict[str, float] = {}
    for task in reversed(topological_order(dag)):
        best_child = 0.0
        for child in dag.children(task):
            c = _mean_transfer(latency, float(dag.edge_size(task, child)), cache)
            best_child = max(best_child, c + ranks[child])
        ranks[task] = profile.mean_time(task) + best_child
    return ranks


def _earliest_start(
    intervals: list[tuple[float, float]],
    capacity: float,
    ready: float,
    duration: float,
) -> float:
    """Earliest t >= ready with a free concurrency slot throughout [t, t+duration)."""
    if capacity == math.inf or len(intervals) < capacity:
        return ready
    candidates = sorted({ready} | {end for _, end in intervals if end > ready})
    for t in candidates:
        window_end = t + duration
        # Concurrency inside the window only changes at interval starts.
        checkpoints = [t] + [s for s, _ in intervals if t < s < window_end]
        ok = True
        for point in checkpoints:
            active = sum(1 for s, e in intervals if s <= point < e)
            if active >= capacity:
                ok = False
                break
        if ok:
            return t
    # Unreachable: past the last interval end the node is idle.
    return max(end for _, end in intervals)


def heft_map(
    dag: TaskDag,
    cluster: ClusterModel,
    profile: ExecutionProfile,
    cap: float | None = None,
) -> Placement:
    """Map every task to a node, minimizing per-task earliest finish time.

    Tasks are visited in decreasing upward rank among tasks whose parents
    are all mapped (rank ties broken by topological index). Each is placed
    on the candidate node with the smallest finish time

        EFT = max(slot availability, latest parent finish + transfer) + exec,

    with EFT ties broken by the lowest node id. ``cap`` (int or math.inf)
    limits how many tasks a node may receive in total; nodes at their cap
    drop out of the candidate set. Infeasible caps (cap * nodes < tasks)
    raise InfeasibleCapError.
    """
    n = cluster.num_nodes
    num_tasks = dag.num_tasks
    if cap is not None and cap != math.inf:
        if cap < 1 or int(cap) != cap:
            raise InfeasibleCapError(f"cap must be a positive integer or inf, got {cap!r}")
        if cap * n < num_tasks:
            raise InfeasibleCapError(
                f"cap {int(cap)} on {n} nodes cannot hold {num_tasks} tasks"
            )

    ranks = upward_rank(dag, profile, cluster.latency)
    assignment: dict[str, int] = {}
    timeline: dict[str, tuple[float, float]] = {}
    node_intervals: dict[int, list[tuple[float, float]]] = {i: [] for i in range(n)}
    node_load: dict[int, int] = {i: 0 for i in range(n)}

    unmapped = set(dag.tasks)
    while unmapped:
        eligible = [
            t for t in unmapped if all(p in assignment for p in dag.parents(t))
        ]
        task = min(eligible, key=lambda t: (-ranks[t], dag.topological_index(t)))

        best: tuple[float, int] | None = None
        best_start = 0.0
        for node in range(n):
            if cap is not None and cap != math.inf and node_load[node] >= cap:
                continue
            ready = 0.0
            for parent in dag.parents(task):
                p_node = assignment[parent]
                hop = cluster.transfer(p_node, node, float(dag.edge_size(parent, task)))
                ready = max(ready, timeline[parent][1] + hop)
            duration = profile.time(task, node)
            start = _earliest_start(
                node_intervals[node],
                cluster.node(node).container_capacity,
                ready,
                duration,
            )
            eft = start + duration
            if best is None or (eft, node) < best:
                best = (eft, node)
                best_start = start
        assert best is not None  # cap feasibility guarantees a candidate
        eft, node = best
        assignment[task] = node
        timeline[task] = (best_start, eft)
        node_intervals[node].append((best_start, eft))
        node_load[node] += 1
        unmapped.remove(task)

    return Placement(assignment, timeline)


def mapping_cost_heft(
    cluster: ClusterModel,
    num_tasks: int,
    payload_size: float = 10_000.0,
    compute_epsilon: float = 1e-3,
) -> float:
    """Wall-clock cost model for computing a centralized map.

    Every node other than home ships a profile payload to home; the arrivals
    are serialized through home's ingest, so the gathering term is the sum of
    the individual transfer times. The algorithm itself contributes
    ``compute_epsilon`` seconds per task-node pair.
    """
    if num_tasks < 1:
        raise ValueError("num_tasks must be >= 1")
    gather = sum(
        cluster.transfer(node.index, cluster.home, payload_size)
        for node in cluster.nodes
        if node.index != cluster.home
    )
    return gather + compute_epsilon * num_tasks * cluster.num_nodes
