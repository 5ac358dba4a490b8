"""Discrete-event dispatch simulation.

Each task runs in its own container on its assigned node and processes the
input sequence strictly in order, one activation at a time. An activation
for sequence ``s`` starts once every parent output tagged ``s`` has arrived
at the task's node (and the previous sequence has finished). Finished
outputs are copied to every child: instantly when the child shares the node,
otherwise after the pairwise transfer time of the payload.

Work scales with input size: an activation's nominal service time is the
profiled execution time multiplied by file_size / reference_size, and edge
payloads scale the same way. Nodes tolerate concurrency up to their
container capacity at full speed; while more activations than that are
active on a node, every active service there accrues progress at rate
1 / overload_slowdown.
"""

from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass, field

from .cluster import ClusterModel, ExecutionProfile
from .dag import TaskDag, topological_order
from .placement import Placement

REFERENCE_SIZE = 100_000.0  # bytes; profiles estimate work for this input size

_TOL = 1e-9


class DispatchError(ValueError):
    """Simulation inputs are inconsistent."""


@dataclass(frozen=True)
class InputFile:
    seq: int
    size: float
    arrival: float


@dataclass
class InputSchedule:
    """Ordered input files with non-decreasing arrival times."""

    files: list[InputFile]

    def __post_init__(self) -> None:
        if not self.files:
            raise DispatchError("schedule needs at least one file")
        for want, f in enumerate(self.files):
            if f.seq != want:
                raise DispatchError("file sequence numbers must run 0, 1, 2, ...")
            if f.size <= 0:
                raise DispatchError(f"file {f.seq}: size must be positive")
        for a, b in zip(self.files, self.files[1:]):
            if b.arrival < a.arrival:
                raise DispatchError("file arrival times must be non-decreasing")

    @classmethod
    def uniform(cls, count: int, size: float, interval: float, start: float = 0.0) -> "InputSchedule":
        return cls([InputFile(s, size, start + s * interval) for s in range(count)])

    def __len__(self) -> int:
        return len(self.files)


@dataclass(frozen=True)
class Activation:
    task: str
    node: int
    start: float
    end: float
    seq: int


@dataclass(frozen=True)
class SimEvent:
    time: float
    kind: str  # "arrival" | "start" | "finish"
    task: str
    node: int
    seq: int


@dataclass
class MakespanReport:
    """Per-sequence makespans plus the full activation and event record."""

    makespans: dict[int, float]
    activations: list[Activation]
    events: list[SimEvent] = field(repr=False)

    def mean_makespan(self) -> float:
        return sum(self.makespans.values()) / len(self.makespans)

    def makespan_rows(self) -> list[tuple]:
        return [(seq, self.makespans[seq]) for seq in sorted(self.makespans)]


class _Service:
    __slots__ = ("task", "seq", "node", "start", "nominal", "remaining")

    def __init__(self, task: str, seq: int, node: int, start: float, nominal: float) -> None:
        self.task = task
        self.seq = seq
        self.node = node
        self.start = start
        self.nominal = nominal
        self.remaining = nominal


def simulate(
    dag: TaskDag,
    placement: Placement,
    cluster: ClusterModel,
    profile: ExecutionProfile,
    schedule: InputSchedule,
    reference_size: float = REFERENCE_SIZE,
) -> MakespanReport:
    """Run the dispatch simulation and report per-sequence makespans.

    The makespan of sequence ``s`` is the completion time of the last sink
    activation for ``s`` minus the file's arrival time. Simultaneous events
    are processed in (timestamp, task name, seq) order, so a given input
    always produces bit-identical output.
    """
    for task in dag.tasks:
        if task not in placement.assignment:
            raise DispatchError(f"placement is missing task {task}")
        node = placement.assignment[task]
        if not (0 <= node < cluster.num_nodes):
            raise DispatchError(f"task {task} placed on unknown node {node}")

    node_of = placement.assignment
    sinks = set(dag.sinks())
    files = schedule.files
    scale = {f.seq: f.size / reference_size for f in files}
    arrival_of = {f.seq: f.arrival for f in files}

    # (task, seq) -> number of inputs still missing; input tasks wait for the file itself
    pending: dict[tuple[str, int], int] = {}
    for task in dag.tasks:
        fan_in = len(dag.parents(task)) if not dag.is_input(task) else 1
        for f in files:
            pending[(task, f.seq)] = fan_in

    # data/source arrivals waiting to be processed: (time, task, seq)
    arrivals: list[tuple[float, str, int]] = []
    for task in sorted(dag.input_tasks):
        for f in files:
            heapq.heappush(arrivals, (f.arrival, task, f.seq))

    next_seq: dict[str, int] = {t: 0 for t in dag.tasks}
    active: dict[str, _Service] = {}
    occupancy: dict[int, int] = {i: 0 for i in range(cluster.num_nodes)}

    events: list[SimEvent] = []
    activations: list[Activation] = []
    makespans: dict[int, float] = {}

    def rate_divisor(node: int) -> float:
        n = cluster.node(node)
        if occupancy[node] > n.container_capacity:
            return n.overload_slowdown
        return 1.0

    now = 0.0
    total = len(files)
    while arrivals or active:
        divisors = {t: rate_divisor(s.node) for t, s in active.items()}
        projections = {t: now + s.remaining * divisors[t] for t, s in active.items()}
        t_next = min(projections.values()) if projections else float("inf")
        if arrivals:
            t_next = min(t_next, arrivals[0][0])
        finishing = sorted(
            (t for t, proj in projections.items() if proj == t_next),
            key=lambda t: (t, active[t].seq),
        )
        if t_next > now:
            delta = t_next - now
            for t, s in active.items():
                if t in finishing:
                    s.remaining = 0.0
                else:
                    s.remaining -= delta / divisors[t]
            now = t_next

        for t in finishing:
            s = active.pop(t)
            occupancy[s.node] -= 1
            events.append(SimEvent(now, "finish", t, s.node, s.seq))
            activations.append(Activation(t, s.node, s.start, now, s.seq))
            if t in sinks:
                done = now - arrival_of[s.seq]
                makespans[s.seq] = max(makespans.get(s.seq, 0.0), done)
            for child in dag.children(t):
                payload = float(dag.edge_size(t, child)) * scale[s.seq]
                child_node = node_of[child]
                if child_node == s.node:
                    heapq.heappush(arrivals, (now, child, s.seq))
                else:
                    hop = cluster.transfer(s.node, child_node, payload)
                    heapq.heappush(arrivals, (now + hop, child, s.seq))

        batch: list[tuple[str, int]] = []
        while arrivals and arrivals[0][0] == now:
            _, task, seq = heapq.heappop(arrivals)
            batch.append((task, seq))
        for task, seq in sorted(batch):
            pending[(task, seq)] -= 1
            events.append(SimEvent(now, "arrival", task, node_of[task], seq))

        for task in dag.tasks:
            if task in active:
                continue
            seq = next_seq[task]
            if seq >= total or pending[(task, seq)] > 0:
                continue
            node = node_of[task]
            nominal = profile.time(task, node) * scale[seq]
            active[task] = _Service(task, seq, node, now, nominal)
            occupancy[node] += 1
            next_seq[task] = seq + 1
            events.append(SimEvent(now, "start", task, node, seq))

    events.sort(key=lambda e: (e.time, e.task, e.seq, e.kind))
    activations.sort(key=lambda a: (a.start, a.task, a.seq))
    return MakespanReport(makespans, activations, events)


@dataclass(frozen=True)
class Violation:
    category: str  # "assignment" | "order" | "barrier" | "precedence" | "overload" | "makespan"
    task: str
    seq: int
    detail: str


def validate_trace(
    report: MakespanReport,
    dag: TaskDag,
    placement: Placement,
    cluster: ClusterModel,
    profile: ExecutionProfile,
    schedule: InputSchedule,
    reference_size: float = REFERENCE_SIZE,
) -> list[Violation]:
    """Independently re-check a simulation report.

    Re-derives, from the activation record alone: assignment totality,
    per-task sequence ordering, input-arrival barriers, precedence plus
    transfer arithmetic along every edge, overload accounting (each
    activation's span must integrate to its nominal work under the node's
    capacity/slowdown rate profile), and the reported makespans. Returns an
    empty list when the report is consistent.
    """
    problems: list[Violation] = []
    files = schedule.files
    scale = {f.seq: f.size / reference_size for f in files}
    arrival_of = {f.seq: f.arrival for f in files}

    acts: dict[tuple[str, int], Activation] = {}
    for a in report.activations:
        key = (a.task, a.seq)
        if key in acts:
            problems.append(Violation("assignment", a.task, a.seq, "duplicate activation"))
        acts[key] = a

    for task in dag.tasks:
        want_node = placement.assignment.get(task)
        if want_node is None:
            problems.append(Violation("assignment", task, -1, "task missing from placement"))
            continue
        for f in files:
            a = acts.get((task, f.seq))
            if a is None:
                problems.append(Violation("assignment", task, f.seq, "activation missing"))
                continue
            if a.node != want_node:
                problems.append(
                    Violation("assignment", task, f.seq, f"ran on node {a.node}, placed on {want_node}")
                )

    if any(p.category == "assignment" for p in problems):
        return problems

    for task in dag.tasks:
        for f in files[1:]:
            prev_end = acts[(task, f.seq - 1)].end
            start = acts[(task, f.seq)].start
            if start + _TOL < prev_end:
                problems.append(
                    Violation("order", task, f.seq, f"starts at {start} before seq {f.seq - 1} ends at {prev_end}")
                )

    for task in dag.tasks:
        for f in files:
            a = acts[(task, f.seq)]
            if dag.is_input(task):
                if a.start + _TOL < arrival_of[f.seq]:
                    problems.append(
                        Violation("barrier", task, f.seq, f"starts at {a.start} before file arrival {arrival_of[f.seq]}")
                    )
            for parent in dag.parents(task):
                pa = acts[(parent, f.seq)]
                payload = float(dag.edge_size(parent, task)) * scale[f.seq]
                hop = 0.0 if pa.node == a.node else cluster.transfer(pa.node, a.node, payload)
                ready = pa.end + hop
                if a.start + _TOL < ready:
                    problems.append(
                        Violation(
                            "precedence",
                            task,
                            f.seq,
                            f"starts at {a.start} before {parent} output arrives at {ready}",
                        )
                    )

    # Overload accounting: integrate each node's rate profile over every span.
    by_node: dict[int, list[Activation]] = {}
    for a in acts.values():
        by_node.setdefault(a.node, []).append(a)
    for node_id, node_acts in sorted(by_node.items()):
        ncp = cluster.node(node_id)
        cuts = sorted({a.start for a in node_acts} | {a.end for a in node_acts})
        for a in node_acts:
            nominal = profile.time(a.task, node_id) * scale[a.seq]
            work = 0.0
            for lo, hi in zip(cuts, cuts[1:]):
                if hi <= a.start or lo >= a.end:
                    continue
                seg = min(hi, a.end) - max(lo, a.start)
                concurrent = sum(1 for other in node_acts if other.start < hi and other.end > lo)
                rate = (
                    1.0 / ncp.overload_slowdown
                    if concurrent > ncp.container_capacity
                    else 1.0
                )
                work += seg * rate
            if abs(work - nominal) > _TOL * max(1.0, nominal):
                problems.append(
                    Violation(
                        "overload",
                        a.task,
                        a.seq,
                        f"span integrates to {work} units of work, nominal is {nominal}",
                    )
                )

    sinks = set(dag.sinks())
    for f in files:
        want = max(acts[(t, f.seq)].end for t in sinks) - arrival_of[f.seq]
        got = report.makespans.get(f.seq)
        if got is None or abs(got - want) > _TOL * max(1.0, want):
            problems.append(
                Violation("makespan", "<report>", f.seq, f"reported {got}, recomputed {want}")
            )
    return problems


def brute_force_optimal(
    dag: TaskDag,
    cluster: ClusterModel,
    profile: ExecutionProfile,
    schedule: InputSchedule,
    limit: int = 200_000,
) -> tuple[Placement, float]:
    """Exhaustively simulate every total assignment; return the best.

    Only single-file schedules are supported, and the search space
    nodes ** tasks must not exceed ``limit``. Ties keep the assignment that
    is lexicographically smallest in task-name order, so the result is
    deterministic.
    """
    if len(schedule) != 1:
        raise DispatchError("brute force search expects a single-file schedule")
    tasks = list(dag.tasks)  # sorted by name
    n = cluster.num_nodes
    space = n ** len(tasks)
    if space > limit:
        raise DispatchError(f"search space {space} exceeds limit {limit}")

    best_assignment: dict[str, int] | None = None
    best_makespan = float("inf")
    for combo in itertools.product(range(n), repeat=len(tasks)):
        assignment = dict(zip(tasks, combo))
        report = simulate(dag, Placement(assignment), cluster, profile, schedule)
        makespan = report.makespans[0]
        if makespan < best_makespan:
            best_makespan = makespan
            best_assignment = assignment
    assert best_assignment is not None
    return Placement(best_assignment), best_makespan
