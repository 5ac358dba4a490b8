"""Decentralized task mapping via per-task controllers.

Instead of one node computing the whole map, each task is mapped by a
"controller": the home node for input tasks, and for every other task one of
its parents. A controller maps its tasks from local information only (its
pairwise delays plus a resource snapshot), and the mapping decisions ripple
through the graph as small control messages. The protocol simulation here
measures how long that ripple takes, counting per-message transfer time plus
a fixed per-hop processing delay, until home has heard about every task.
"""

from __future__ import annotations

import heapq
import random
from dataclasses import dataclass

from .cluster import ClusterModel, LatencyModel, ResourceSnapshot
from .dag import TaskDag, topological_order
from .placement import Placement

#: Controller value for input tasks: mapped directly by the home node.
HOME = None

DEFAULT_CONTROL_PAYLOAD = 1_000.0  # bytes per protocol message
DEFAULT_HOP_DELAY = 0.01  # seconds of processing per received message
DEFAULT_PROBE_SIZE = 10_000.0  # bytes assumed when ranking neighbor delays


class WaveError(ValueError):
    """A decentralized mapping step received inconsistent inputs."""


@dataclass(frozen=True)
class GreedyParams:
    """Neighbor-ranking parameters: threshold factor and criterion weights."""

    k: float = 15.0
    weight_delay: float = 1.0 / 3.0
    weight_cpu: float = 1.0 / 3.0
    weight_mem: float = 1.0 / 3.0

    def __post_init__(self) -> None:
        if self.k <= 1.0:
            raise WaveError(f"threshold factor k must be > 1, got {self.k}")
        weights = (self.weight_delay, self.weight_cpu, self.weight_mem)
        if any(w < 0 for w in weights):
            raise WaveError("criterion weights must be non-negative")
        if abs(sum(weights) - 1.0) > 1e-12:
            raise WaveError(f"criterion weights must sum to 1, got {sum(weights)!r}")

    @classmethod
    def normalized(cls, k: float, weight_delay: float, weight_cpu: float, weight_mem: float) -> "GreedyParams":
        """Build params from raw non-negative weights, rescaling them to sum 1."""
        total = weight_delay + weight_cpu + weight_mem
        if total <= 0:
            raise WaveError("at least one criterion weight must be positive")
        return cls(k, weight_delay / total, weight_cpu / total, weight_mem / total)


@dataclass(frozen=True)
class TraceEvent:
    time: float
    kind: str  # "assign" | "notify" | "activate"
    sender: int
    receiver: int
    task: str


@dataclass
class MappingTrace:
    """Protocol messages in causal order plus the overall completion time."""

    events: list[TraceEvent]
    completion_time: float

    def csv_rows(self) -> list[tuple]:
        return [(e.time, e.kind, e.sender, e.receiver, e.task) for e in self.events]


def select_controllers(dag: TaskDag) -> dict[str, str | None]:
    """Choose the controller of every task.

    Walking the DAG in topological order: input tasks belong to home; any
    other task goes to the unique parent that is already a controller, and if
    no parent (or more than one) qualifies, to the parent with the smallest
    topological index. Deterministic because the walk order is.
    """
    controllers: dict[str, str | None] = {}
    is_controller: set[str] = set()
    for task in topological_order(dag):
        if dag.is_input(task):
            controllers[task] = HOME
            continue
        parents = dag.parents(task)
        already = [p for p in parents if p in is_controller]
        if len(already) == 1:
            chosen = already[0]
        else:
            chosen = min(parents, key=dag.topological_index)
        controllers[task] = chosen
        is_controller.add(chosen)
    return controllers


def place_inputs(dag: TaskDag, cluster: ClusterModel) -> dict[str, int]:
    """Pin every input task to the lowest-id node matching its source location."""
    placement: dict[str, int] = {}
    for task in sorted(dag.input_tasks):
        location = dag.source_location(task)
        candidates = [n.index for n in cluster.nodes if n.location == location]
        if not candidates:
            raise WaveError(
                f"input task {task}: no node at location {location!r} "
                f"(cluster has {', '.join(cluster.locations)})"
            )
        placement[task] = min(candidates)
    return placement


def feasible_set(
    node: int,
    latency: LatencyModel,
    probe_size: float = DEFAULT_PROBE_SIZE,
    k: float = 15.0,
) -> set[int]:
    """Nodes close enough to ``node`` to be mapping candidates.

    A neighbor j qualifies when its delay d(node, j) for the probe payload is
    strictly below k times the smallest neighbor delay. The nearest neighbor
    is always included (covering the degenerate all-equal-delay edge), and so
    is the node itself.
    """
    if latency.num_nodes < 2:
        raise WaveError("feasible_set needs at least two nodes")
    if k <= 1.0:
        raise WaveError(f"threshold factor k must be > 1, got {k}")
    delays = {
        j: latency.transfer_time(node, j, probe_size)
        for j in range(latency.num_nodes)
        if j != node
    }
    d_min = min(delays.values())
    threshold = k * d_min
    members = {j for j, d in delays.items() if d < threshold or d == d_min}
    members.add(node)
    return members


def neighbor_rank(d_norm: float, cpu: float, mem: float, params: GreedyParams) -> float:
    """Weighted badness of one candidate; lower is better.

    All three inputs must already be normalized into [0, 1]: the delay by the
    feasibility threshold, cpu/mem as usage fractions.
    """
    for label, value in (("d_norm", d_norm), ("cpu", cpu), ("mem", mem)):
        if not (0.0 <= value <= 1.0):
            raise WaveError(f"{label} outside [0, 1]: {value}")
    return params.weight_delay * d_norm + params.weight_cpu * cpu + params.weight_mem * mem


def _duty_lists(dag: TaskDag, controllers: dict[str, str | None]) -> dict[str | None, list[str]]:
    """Tasks each controller maps, in topological order."""
    duties: dict[str | None, list[str]] = {}
    for task in topological_order(dag):
        duties.setdefault(controllers[task], []).append(task)
    return duties


def _ranked_candidates(
    node: int,
    cluster: ClusterModel,
    snapshot: ResourceSnapshot,
    params: GreedyParams,
    probe_size: float,
) -> list[int]:
    """Feasible nodes around ``node``, best rank first (ties to lower id)."""
    members = feasible_set(node, cluster.latency, probe_size, params.k)
    delays = {j: cluster.transfer(node, j, probe_size) for j in members}
    d_min = min(d for j, d in delays.items() if j != node) if len(members) > 1 else 0.0
    threshold = params.k * d_min
    scored = []
    for j in sorted(members):
        d_norm = delays[j] / threshold if threshold > 0 else 0.0
        score = neighbor_rank(d_norm, snapshot.cpu[j], snapshot.mem[j], params)
        scored.append((score, j))
    scored.sort()
    return [j for _, j in scored]


def wave_greedy(
    dag: TaskDag,
    cluster: ClusterModel,
    snapshot: ResourceSnapshot,
    params: GreedyParams | None = None,
    probe_size: float = DEFAULT_PROBE_SIZE,
    control_payload: float = DEFAULT_CONTROL_PAYLOAD,
    hop_delay: float = DEFAULT_HOP_DELAY,
) -> tuple[Placement, MappingTrace]:
    """Decentralized greedy mapping.

    Home pins input tasks by data location. Every other controller ranks its
    feasible neighborhood by weighted delay/cpu/memory badness and deals its
    tasks (in topological order) onto the ranked candidates one-to-one; with
    more tasks than candidates the deal wraps around.
    """
    params = params or GreedyParams()
    controllers = select_controllers(dag)
    duties = _duty_lists(dag, controllers)
    assignment: dict[str, int] = dict(place_inputs(dag, cluster))

    candidate_cache: dict[int, list[int]] = {}
    for task in topological_order(dag):
        if dag.is_input(task):
            continue
        controller = controllers[task]
        ctrl_node = assignment[controller]
        if ctrl_node not in candidate_cache:
            candidate_cache[ctrl_node] = _ranked_candidates(
                ctrl_node, cluster, snapshot, params, probe_size
            )
        ranked = candidate_cache[ctrl_node]
        position = duties[controller].index(task)
        assignment[task] = ranked[position % len(ranked)]

    trace = simulate_mapping_runtime(
        dag, cluster, controllers, assignment, control_payload, hop_delay
    )
    return Placement(assignment), trace


def wave_random(
    dag: TaskDag,
    cluster: ClusterModel,
    seed: int,
    control_payload: float = DEFAULT_CONTROL_PAYLOAD,
    hop_delay: float = DEFAULT_HOP_DELAY,
) -> tuple[Placement, MappingTrace]:
    """Decentralized random mapping: controllers pick nodes uniformly.

    Input tasks are still pinned by data location. Random draws are consumed
    in topological task order, so a seed fully determines the placement.
    """
    rng = random.Random(seed)
    controllers = select_controllers(dag)
    assignment: dict[str, int] = dict(place_inputs(dag, cluster))
    for task in topological_order(dag):
        if not dag.is_input(task):
            assignment[task] = rng.randrange(cluster.num_nodes)
    trace = simulate_mapping_runtime(
        dag, cluster, controllers, assignment, control_payload, hop_delay
    )
    return Placement(assignment), trace


def simulate_mapping_runtime(
    dag: TaskDag,
    cluster: ClusterModel,
    controllers: dict[str, str | None],
    assignment: dict[str, int],
    control_payload: float = DEFAULT_CONTROL_PAYLOAD,
    hop_delay: float = DEFAULT_HOP_DELAY,
) -> MappingTrace:
    """Measure the control-plane latency of a decentralized mapping.

    Every protocol message from node s to node d costs
    transfer_time(s, d, control_payload) + hop_delay, with zero transfer when
    s == d. At t=0 home assigns the input tasks; each assignment is announced
    to home with a "notify" message, and tasks that control others receive an
    "activate" message at their node, which in turn assigns that controller's
    tasks. The mapping is complete when home has received every notify.
    """
    for task in dag.tasks:
        if task not in assignment:
            raise WaveError(f"assignment is missing task {task}")
    duties = _duty_lists(dag, controllers)
    home = cluster.home

    def message_cost(src: int, dst: int) -> float:
        hop = 0.0 if src == dst else cluster.transfer(src, dst, control_payload)
        return hop + hop_delay

    events: list[TraceEvent] = []
    notify_arrivals: list[float] = []
    # (arrival time, sender node, controller task) -- ties resolved by sender id
    pending: list[tuple[float, int, str]] = []

    def run_controller(controller: str | None, node: int, now: float) -> None:
        for task in duties.get(controller, []):
            target = assignment[task]
            events.append(TraceEvent(now, "assign", node, node, task))
            arrival = now + message_cost(node, home)
            events.append(TraceEvent(arrival, "notify", node, home, task))
            notify_arrivals.append(arrival)
            if duties.get(task):
                activate_at = now + message_cost(node, target)
                events.append(TraceEvent(activate_at, "activate", node, target, task))
                heapq.heappush(pending, (activate_at, node, task))

    run_controller(HOME, home, 0.0)
    while pending:
        when, _sender, controller_task = heapq.heappop(pending)
        run_controller(controller_task, assignment[controller_task], when)

    events.sort(key=lambda e: (e.time, e.sender, e.receiver, e.kind, e.task))
    completion = max(notify_arrivals) if notify_arrivals else 0.0
    return MappingTrace(events, completion)
