"""Task graph model.

A workload is a directed acyclic graph of named tasks. Every edge carries the
number of bytes the parent ships to the child. Source tasks ("input tasks")
are tagged with the location label of the data source that feeds them; they
are the only tasks allowed to have no parents.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass


class DagError(ValueError):
    """A task graph failed validation or parsing."""


@dataclass(frozen=True, order=True)
class Edge:
    parent: str
    child: str
    data_size: int


class TaskDag:
    """Immutable DAG of named tasks with per-edge payload sizes.

    Construction validates the full invariant set: unique non-empty task
    names, edges between known tasks, positive payload sizes, acyclicity,
    and agreement between "has no parents" and "is an input task". Instances
    are safe to share read-only.
    """

    def __init__(
        self,
        tasks,
        edges,
        input_tasks: dict[str, str],
    ) -> None:
        task_list = list(tasks)
        if not task_list:
            raise DagError("a task graph needs at least one task")
        for name in task_list:
            if not isinstance(name, str) or not name or name.split() != [name]:
                raise DagError(f"bad task name: {name!r}")
        if len(set(task_list)) != len(task_list):
            dupes = sorted({t for t in task_list if task_list.count(t) > 1})
            raise DagError(f"duplicate task names: {', '.join(dupes)}")
        self._tasks: tuple[str, ...] = tuple(sorted(task_list))
        known = set(self._tasks)

        edge_objs = []
        for item in edges:
            e = item if isinstance(item, Edge) else Edge(*item)
            if e.parent not in known or e.child not in known:
                raise DagError(f"edge {e.parent}->{e.child} references unknown task")
            if e.parent == e.child:
                raise DagError(f"self edge on task {e.parent}")
            if not isinstance(e.data_size, int) or e.data_size <= 0:
                raise DagError(
                    f"edge {e.parent}->{e.child} needs a positive byte size, got {e.data_size!r}"
                )
            edge_objs.append(e)
        edge_objs.sort()
        for a, b in zip(edge_objs, edge_objs[1:]):
            if (a.parent, a.child) == (b.parent, b.child):
                raise DagError(f"duplicate edge {a.parent}->{a.child}")
        self._edges: tuple[Edge, ...] = tuple(edge_objs)

        self._parents: dict[str, list[str]] = {t: [] for t in self._tasks}
        self._children: dict[str, list[str]] = {t: [] for t in self._tasks}
        self._size: dict[tuple[str, str], int] = {}
        for e in self._edges:
            self._parents[e.child].append(e.parent)
            self._children[e.parent].append(e.child)
            self._size[(e.parent, e.child)] = e.data_size

        self._inputs: dict[str, str] = dict(input_tasks)
        for name, loc in self._inputs.items():
            if name not in known:
                raise DagError(f"input task {name} is not in the graph")
            if not loc or not isinstance(loc, str):
                raise DagError(f"input task {name} needs a source location label")
            if self._parents[name]:
                raise DagError(f"input task {name} has incoming edges")
        for t in self._tasks:
            if not self._parents[t] and t not in self._inputs:
                raise DagError(f"task {t} has no parents but is not an input task")

        self._topo: tuple[str, ...] = tuple(self._kahn())
        self._topo_index: dict[str, int] = {t: i for i, t in enumerate(self._topo)}

    def _kahn(self) -> list[str]:
        indeg = {t: len(self._parents[t]) for t in self._tasks}
        ready = [t for t in self._tasks if indeg[t] == 0]
        heapq.heapify(ready)
        order = []
        while ready:
            t = heapq.heappop(ready)
            order.append(t)
            for c in self._children[t]:
                indeg[c] -= 1
                if indeg[c] == 0:
                    heapq.heappush(ready, c)
        if len(order) != len(self._tasks):
            stuck = sorted(t for t in self._tasks if indeg[t] > 0)
            raise DagError(f"cycle detected involving: {', '.join(stuck)}")
        return order

    @property
    def tasks(self) -> tuple[str, ...]:
        return self._tasks

    @property
    def edges(self) -> tuple[Edge, ...]:
        return self._edges

    @property
    def input_tasks(self) -> dict[str, str]:
        return dict(self._inputs)

    @property
    def num_tasks(self) -> int:
        return len(self._tasks)

    def is_input(self, task: str) -> bool:
        return task in self._inputs

    def source_location(self, task: str) -> str:
        return self._inputs[task]

    def parents(self, task: str) -> tuple[str, ...]:
        return tuple(sorted(self._parents[task]))

    def children(self, task: str) -> tuple[str, ...]:
        return tuple(sorted(self._children[task]))

    def edge_size(self, parent: str, child: str) -> int:
        try:
            return self._size[(parent, child)]
        except KeyError:
            raise DagError(f"no edge {parent}->{child}") from None

    def sinks(self) -> tuple[str, ...]:
        return tuple(t for t in self._tasks if not self._children[t])

    def topological_index(self, task: str) -> int:
        return self._topo_index[task]


def topological_order(dag: TaskDag) -> list[str]:
    """Deterministic topological order (Kahn's algorithm, lexicographic ties).

    Every task appears exactly once, parents before children. Because ties
    among simultaneously-ready tasks are broken by name, the result is unique
    for a given graph and identical across runs.
    """
    return list(dag._topo)


def parse_dag(text: str) -> TaskDag:
    """Parse the line-oriented DAG format.

    Grammar, one declaration per line::

        task <name> [input @<location>]
        edge <parent> <child> <data_size_bytes>

    Blank lines and ``#`` comments are ignored. Names are
    whitespace-delimited tokens.
    """
    tasks: list[str] = []
    inputs: dict[str, str] = {}
    edges: list[Edge] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        kind = parts[0]
        if kind == "task":
            if len(parts) == 2:
                tasks.append(parts[1])
            elif len(parts) == 4 and parts[2] == "input" and parts[3].startswith("@"):
                name, loc = parts[1], parts[3][1:]
                if not loc:
                    raise DagError(f"line {lineno}: empty location label")
                tasks.append(name)
                inputs[name] = loc
            else:
                raise DagError(f"line {lineno}: malformed task declaration: {raw.strip()!r}")
        elif kind == "edge":
            if len(parts) != 4:
                raise DagError(f"line {lineno}: malformed edge declaration: {raw.strip()!r}")
            try:
                size = int(parts[3])
            except ValueError:
                raise DagError(f"line {lineno}: edge size must be an integer") from None
            edges.append(Edge(parts[1], parts[2], size))
        else:
            raise DagError(f"line {lineno}: unknown declaration {kind!r}")
    return TaskDag(tasks, edges, inputs)


def serialize_dag(dag: TaskDag) -> str:
    """Render a graph back to the file format.

    Tasks are emitted sorted by name, then edges sorted by (parent, child),
    so serialize(parse(serialize(g))) == serialize(g).
    """
    lines = []
    for t in dag.tasks:
        if dag.is_input(t):
            lines.append(f"task {t} input @{dag.source_location(t)}")
        else:
            lines.append(f"task {t}")
    for e in dag.edges:
        lines.append(f"edge {e.parent} {e.child} {e.data_size}")
    return "\n".join(lines) + "\n"


def dnad_fixture(edge_size: int = 100_000, source_location: str = "loc0") -> TaskDag:
    """The bundled network anomaly detector pipeline.

    One local-processing input task fans out to three aggregation tasks;
    each aggregation stream feeds two detectors (a simple and an astute
    variant) whose verdicts meet in a per-stream fusion task; the three
    fusion tasks feed one global fusion sink. 14 tasks, 18 edges. All edges
    carry ``edge_size`` bytes.
    """
    tasks = ["local_proc"]
    edges: list[Edge] = []
    for i in range(3):
        agg = f"agg{i}"
        simple = f"simple_det{i}"
        astute = f"astute_det{i}"
        fusion = f"fusion{i}"
        tasks += [agg, simple, astute, fusion]
        edges.append(Edge("local_proc", agg, edge_size))
        edges.append(Edge(agg, simple, edge_size))
        edges.append(Edge(agg, astute, edge_size))
        edges.append(Edge(simple, fusion, edge_size))
        edges.append(Edge(astute, fusion, edge_size))
        edges.append(Edge(fusion, "global_fusion", edge_size))
    tasks.append("global_fusion")
    return TaskDag(tasks, edges, {"local_proc": source_location})
