"""Task-to-node placements and their consistency checks."""

from __future__ import annotations

from dataclasses import dataclass, field

from .cluster import ClusterModel, ExecutionProfile
from .dag import TaskDag

_TOL = 1e-9


@dataclass
class Placement:
    """Assignment of every task to a node, optionally with a planned timeline.

    ``timeline`` maps task -> (start, finish) in seconds; mappers that only
    decide locations leave it as None.
    """

    assignment: dict[str, int]
    timeline: dict[str, tuple[float, float]] | None = None

    def node_of(self, task: str) -> int:
        return self.assignment[task]

    @property
    def planned_makespan(self) -> float:
        """Latest planned finish; requires a timeline."""
        if self.timeline is None:
            raise ValueError("placement has no planned timeline")
        return max(end for _, end in self.timeline.values())

    def csv_rows(self) -> list[tuple]:
        rows = []
        for task in sorted(self.assignment):
            if self.timeline and task in self.timeline:
                start, end = self.timeline[task]
                rows.append((task, self.assignment[task], start, end))
            else:
                rows.append((task, self.assignment[task], "", ""))
        return rows


def validate_placement(
    placement: Placement,
    dag: TaskDag,
    cluster: ClusterModel,
    profile: ExecutionProfile | None = None,
) -> list[str]:
    """Independent re-check of a placement. Returns human-readable violations.

    Verifies the assignment is total and within node range. When a timeline
    is present it additionally verifies planned durations against the
    execution profile, precedence plus transfer time along every edge, and
    that no node ever hosts more concurrent planned intervals than its
    container capacity.
    """
    problems: list[str] = []
    for task in dag.tasks:
        if task not in placement.assignment:
            problems.append(f"assignment: task {task} is unmapped")
        elif not (0 <= placement.assignment[task] < cluster.num_nodes):
            problems.append(f"assignment: task {task} mapped to unknown node {placement.assignment[task]}")
    if problems or placement.timeline is None:
        return problems

    timeline = placement.timeline
    for task in dag.tasks:
        if task not in timeline:
            problems.append(f"timeline: task {task} has no planned interval")
    if problems:
        return problems

    for task in dag.tasks:
        start, end = timeline[task]
        node = placement.assignment[task]
        if profile is not None:
            want = profile.time(task, node)
            if abs((end - start) - want) > _TOL * max(1.0, want):
                problems.append(
                    f"duration: task {task} planned {end - start:.9f}s, profile says {want:.9f}s"
                )
        for parent in dag.parents(task):
            p_end = timeline[parent][1]
            hop = cluster.transfer(
                placement.assignment[parent], node, float(dag.edge_size(parent, task))
            )
            if start + _TOL < p_end + hop:
                problems.append(
                    f"precedence: {parent}->{task} starts at {start:.9f} before "
                    f"{p_end:.9f} + transfer {hop:.9f}"
                )

    by_node: dict[int, list[tuple[float, float, str]]] = {}
    for task, (start, end) in timeline.items():
        by_node.setdefault(placement.assignment[task], []).append((start, end, task))
    for node_id, intervals in sorted(by_node.items()):
        cap = cluster.node(node_id).container_capacity
        if cap == float("inf"):
            continue
        for start, _end, task in sorted(intervals):
            # concurrency sampled just after each start; open-ended at interval ends
            concurrent = sum(1 for s, e, _ in intervals if s - _TOL <= start < e - _TOL)
            if concurrent > cap:
                problems.append(
                    f"capacity: node {node_id} hosts {concurrent} concurrent planned tasks"
                    f" (capacity {int(cap)}) at t={start:.9f}"
                )
    return problems
