"""Shared builders and independent oracles used across the test modules."""

import random

import dispersim as d


def uniform_cluster(
    n,
    p=0.05,
    q=0.0,
    r=0.0,
    speed=1.0,
    capacity=float("inf"),
    slowdown=1.0,
    location="loc0",
    home=0,
):
    """Cluster with identical pairwise latency and explicit node parameters."""
    speeds = list(speed) if isinstance(speed, (list, tuple)) else [speed] * n
    nodes = [d.Ncp(i, location, speeds[i], capacity, slowdown) for i in range(n)]
    return d.ClusterModel(nodes, d.LatencyModel.uniform(n, p, q, r), home=home)


def diamond_dag(edge_size=100_000):
    """Six-task diamond: A,B feed C; C feeds D,E; D,E feed F."""
    return d.TaskDag(
        ["A", "B", "C", "D", "E", "F"],
        [
            ("A", "C", edge_size),
            ("B", "C", edge_size),
            ("C", "D", edge_size),
            ("C", "E", edge_size),
            ("D", "F", edge_size),
            ("E", "F", edge_size),
        ],
        {"A": "loc1", "B": "loc2"},
    )


def rank_oracle(dag, profile, latency):
    """Direct recursive evaluation of the rank recurrence.

    Deliberately structured differently from the implementation (top-down
    memoized recursion, means recomputed from scratch) so the two can only
    agree by computing the same function.
    """
    n = latency.num_nodes

    def mean_exec(task):
        return sum(profile.time(task, i) for i in range(n)) / n

    def mean_transfer(size):
        if n < 2:
            return 0.0
        total = 0.0
        for i in range(n):
            for j in range(n):
                if i != j:
                    total += latency.transfer_time(i, j, size)
        return total / (n * (n - 1))

    memo = {}

    def rank(task):
        if task not in memo:
            best = 0.0
            for child in dag.children(task):
                best = max(best, mean_transfer(float(dag.edge_size(task, child))) + rank(child))
            memo[task] = mean_exec(task) + best
        return memo[task]

    return {t: rank(t) for t in dag.tasks}


def quad_fit_oracle(points):
    """Quadratic least squares via 3x3 normal equations and Cramer's rule."""
    m = [[0.0] * 3 for _ in range(3)]
    v = [0.0] * 3
    for f, t in points:
        basis = (1.0, f, f * f)
        for i in range(3):
            v[i] += basis[i] * t
            for j in range(3):
                m[i][j] += basis[i] * basis[j]

    def det3(a):
        return (
            a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
            - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
            + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
        )

    base = det3(m)
    out = []
    for col in range(3):
        mm = [row[:] for row in m]
        for i in range(3):
            mm[i][col] = v[i]
        out.append(det3(mm) / base)
    return tuple(out)


def random_instance(rng: random.Random, max_tasks, max_nodes):
    """Small random (dag, cluster, profile) for oracle comparisons.

    All capacities are unbounded and every parentless task becomes an input
    pinned at the single location, so any total assignment is feasible.
    """
    t = rng.randint(1, max_tasks)
    n = rng.randint(1, max_nodes)
    names = [f"t{i:02d}" for i in range(t)]
    edges = []
    for i in range(t):
        for j in range(i + 1, t):
            if rng.random() < 0.4:
                edges.append((names[i], names[j], rng.randint(50_000, 200_000)))
    has_parent = {child for _, child, _ in edges}
    inputs = {name: "loc0" for name in names if name not in has_parent}
    dag = d.TaskDag(names, edges, inputs)

    coeff = {}
    for i in range(n):
        for j in range(n):
            if i != j:
                coeff[(i, j)] = (rng.uniform(0.02, 0.2), rng.uniform(1e-8, 5e-7), 0.0)
    latency = d.LatencyModel(n, coeff)
    nodes = [d.Ncp(i, "loc0", rng.uniform(0.7, 1.4), float("inf"), 1.0) for i in range(n)]
    cluster = d.ClusterModel(nodes, latency, home=0)
    costs = {name: rng.uniform(1.0, 4.0) for name in names}
    return dag, cluster, d.profile_execution(dag, cluster, costs)


def single_file(size=100_000.0):
    return d.InputSchedule.uniform(1, size, 0.0)
