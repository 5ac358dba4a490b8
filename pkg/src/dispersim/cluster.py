"""Cluster model: compute nodes, pairwise network latency, resource state.

The network between every ordered pair of distinct nodes is summarized by a
quadratic transfer-time model ``t(f) = p + q*f + r*f^2`` fitted from probe
measurements, valid for file sizes from 1 byte to 10 MB. Transfers between a
node and itself take zero time.
"""

from __future__ import annotations

import configparser
import math
import random
from dataclasses import dataclass, field

import numpy as np

MIN_FILE_SIZE = 1.0
MAX_FILE_SIZE = 10_000_000.0

#: Probe sizes used when synthesizing network measurement samples.
PROBE_SIZES = (1_000.0, 10_000.0, 100_000.0, 1_000_000.0)


class ClusterError(ValueError):
    """A cluster description or latency model failed validation."""


def _quad_min(p: float, q: float, r: float, lo: float, hi: float) -> float:
    """Minimum of p + q*f + r*f^2 over [lo, hi]."""
    best = min(p + q * lo + r * lo * lo, p + q * hi + r * hi * hi)
    if r > 0.0:
        vertex = -q / (2.0 * r)
        if lo < vertex < hi:
            best = min(best, p + q * vertex + r * vertex * vertex)
    return best


class LatencyModel:
    """Quadratic transfer-time coefficients for every ordered node pair."""

    def __init__(
        self,
        num_nodes: int,
        coefficients: dict[tuple[int, int], tuple[float, float, float]],
    ) -> None:
        if num_nodes < 1:
            raise ClusterError("latency model needs at least one node")
        self._n = num_nodes
        self._coeff: dict[tuple[int, int], tuple[float, float, float]] = {}
        for i in range(num_nodes):
            for j in range(num_nodes):
                if i == j:
                    continue
                try:
                    p, q, r = coefficients[(i, j)]
                except KeyError:
                    raise ClusterError(f"missing coefficients for pair ({i}, {j})") from None
                if _quad_min(p, q, r, MIN_FILE_SIZE, MAX_FILE_SIZE) < -1e-12:
                    raise ClusterError(
                        f"pair ({i}, {j}): model goes negative inside the supported size range"
                    )
                self._coeff[(i, j)] = (float(p), float(q), float(r))

    @classmethod
    def uniform(cls, num_nodes: int, p: float, q: float = 0.0, r: float = 0.0) -> "LatencyModel":
        """Same coefficients on every ordered pair; handy for small setups."""
        coeff = {
            (i, j): (p, q, r)
            for i in range(num_nodes)
            for j in range(num_nodes)
            if i != j
        }
        return cls(num_nodes, coeff)

    @property
    def num_nodes(self) -> int:
        return self._n

    def coefficients(self, src: int, dst: int) -> tuple[float, float, float]:
        return self._coeff[(src, dst)]

    def transfer_time(self, src: int, dst: int, file_size: float) -> float:
        """Seconds to move ``file_size`` bytes from src to dst. Zero if src == dst."""
        if not (0 <= src < self._n and 0 <= dst < self._n):
            raise ClusterError(f"node id out of range: ({src}, {dst})")
        if src == dst:
            return 0.0
        f = float(file_size)
        if not (MIN_FILE_SIZE <= f <= MAX_FILE_SIZE):
            raise ClusterError(
                f"file size {f} outside supported range [{MIN_FILE_SIZE}, {MAX_FILE_SIZE}] bytes"
            )
        p, q, r = self._coeff[(src, dst)]
        return p + q * f + r * f * f

    def csv_rows(self) -> list[tuple]:
        return [(i, j, p, q, r) for (i, j), (p, q, r) in sorted(self._coeff.items())]


def fit_latency_model(
    num_nodes: int,
    samples: dict[tuple[int, int], list[tuple[float, float]]],
) -> tuple[LatencyModel, dict[tuple[int, int], float]]:
    """Least-squares quadratic fit per ordered pair of probe measurements.

    ``samples`` maps (src, dst) to a list of (file_size, seconds)
    measurements; every ordered pair of distinct nodes needs at least three
    samples at three distinct sizes. Returns the fitted model and the l2
    residual norm per pair. Raises ClusterError for under-determined sample
    sets or fits that go negative inside the supported size range.
    """
    coeff: dict[tuple[int, int], tuple[float, float, float]] = {}
    residuals: dict[tuple[int, int], float] = {}
    for i in range(num_nodes):
        for j in range(num_nodes):
            if i == j:
                continue
            pts = samples.get((i, j))
            if not pts or len(pts) < 3 or len({f for f, _ in pts}) < 3:
                raise ClusterError(
                    f"pair ({i}, {j}): need >= 3 samples at >= 3 distinct sizes"
                )
            sizes = np.array([float(f) for f, _ in pts])
            times = np.array([float(t) for _, t in pts])
            # Scale sizes to ~1 to keep the Vandermonde system well conditioned,
            # then map the solution back to unscaled coefficients.
            scale = sizes.max()
            fs = sizes / scale
            design = np.column_stack([np.ones_like(fs), fs, fs * fs])
            sol, *_ = np.linalg.lstsq(design, times, rcond=None)
            p, q, r = float(sol[0]), float(sol[1]) / scale, float(sol[2]) / (scale * scale)
            coeff[(i, j)] = (p, q, r)
            residuals[(i, j)] = float(np.linalg.norm(design @ sol - times))
    return LatencyModel(num_nodes, coeff), residuals


@dataclass(frozen=True)
class Ncp:
    """One networked compute point."""

    index: int
    location: str
    speed_factor: float
    container_capacity: float  # positive int, or math.inf for unbounded
    overload_slowdown: float

    def __post_init__(self) -> None:
        if self.speed_factor <= 0:
            raise ClusterError(f"node {self.index}: speed_factor must be > 0")
        cap = self.container_capacity
        if cap != float("inf") and (cap < 1 or int(cap) != cap):
            raise ClusterError(f"node {self.index}: container_capacity must be a positive integer or inf")
        if self.overload_slowdown < 1.0:
            raise ClusterError(f"node {self.index}: overload_slowdown must be >= 1")
        if not self.location:
            raise ClusterError(f"node {self.index}: empty location label")


class ClusterModel:
    """Nodes plus the latency model between them. Exactly one node is home."""

    def __init__(self, nodes: list[Ncp], latency: LatencyModel, home: int = 0) -> None:
        if len(nodes) < 1:
            raise ClusterError("cluster needs at least one node")
        for want, node in enumerate(nodes):
            if node.index != want:
                raise ClusterError("node indexes must be consecutive from 0")
        if latency.num_nodes != len(nodes):
            raise ClusterError("latency model size does not match node count")
        if not (0 <= home < len(nodes)):
            raise ClusterError(f"home index {home} out of range")
        self.nodes = list(nodes)
        self.latency = latency
        self.home = home

    @property
    def num_nodes(self) -> int:
        return len(self.nodes)

    @property
    def locations(self) -> tuple[str, ...]:
        return tuple(sorted({n.location for n in self.nodes}))

    def node(self, index: int) -> Ncp:
        return self.nodes[index]

    def transfer(self, src: int, dst: int, file_size: float) -> float:
        return self.latency.transfer_time(src, dst, file_size)


@dataclass
class ResourceSnapshot:
    """Fractional cpu/memory usage per node, each in [0, 1]."""

    cpu: dict[int, float]
    mem: dict[int, float]

    def __post_init__(self) -> None:
        for table, label in ((self.cpu, "cpu"), (self.mem, "mem")):
            for node, value in table.items():
                if not (0.0 <= value <= 1.0):
                    raise ClusterError(f"{label} usage for node {node} outside [0, 1]: {value}")


class ExecutionProfile:
    """Estimated execution seconds for every (task, node) pair."""

    def __init__(self, times: dict[tuple[str, int], float]) -> None:
        if not times:
            raise ClusterError("execution profile is empty")
        for (task, node), sec in times.items():
            if sec <= 0:
                raise ClusterError(f"exec time for ({task}, {node}) must be > 0, got {sec}")
        self._times = dict(times)
        self.tasks = tuple(sorted({t for t, _ in times}))
        self.nodes = tuple(sorted({n for _, n in times}))
        for t in self.tasks:
            for n in self.nodes:
                if (t, n) not in self._times:
                    raise ClusterError(f"execution profile missing entry for ({t}, {n})")

    def time(self, task: str, node: int) -> float:
        try:
            return self._times[(task, node)]
        except KeyError:
            raise ClusterError(f"no exec estimate for ({task}, {node})") from None

    def mean_time(self, task: str) -> float:
        return sum(self._times[(task, n)] for n in self.nodes) / len(self.nodes)

    def csv_rows(self) -> list[tuple]:
        return [(t, n, self._times[(t, n)]) for t in self.tasks for n in self.nodes]


def profile_execution(dag, cluster: ClusterModel, base_costs: dict[str, float]) -> ExecutionProfile:
    """Execution estimates from per-task base costs and per-node speed factors.

    exec_time(task, node) = base_cost(task) / speed_factor(node).
    """
    times: dict[tuple[str, int], float] = {}
    for task in dag.tasks:
        try:
            base = base_costs[task]
        except KeyError:
            raise ClusterError(f"no base cost for task {task}") from None
        if base <= 0:
            raise ClusterError(f"base cost for task {task} must be > 0")
        for node in cluster.nodes:
            times[(task, node.index)] = base / node.speed_factor
    return ExecutionProfile(times)


# Per-class synthesis presets: (capacity range, slowdown range, raw speed range).
_NODE_CLASSES: dict[str, dict[str, tuple[float, float]]] = {
    "rpi-like": {"capacity": (2, 3), "slowdown": (4.0, 10.0), "speed": (0.95, 1.05)},
    "cloud-like": {"capacity": (6, 10), "slowdown": (1.0, 1.3), "speed": (1.0, 2.0)},
}

# How strongly background load degrades a node's effective speed: at weight w,
# a node pegged at 100% cpu and memory runs at (1 - w) of its raw speed.
_USAGE_SPEED_WEIGHT = 0.9

_DEFAULT_INTRA = (0.01, 0.05)
_DEFAULT_INTER = (0.10, 0.50)
_DEFAULT_BANDWIDTH = (1e6, 1e7)  # bytes/second; q = 1/bandwidth
_CURVATURE_MAX = 2e-15  # r upper bound; keeps the quadratic term mild at 10 MB


@dataclass
class ClusterRecipe:
    """Input to synth_cluster: how many nodes, where, and of what class."""

    node_count: int
    locations: int | list[str] = 1
    node_class: str = "rpi-like"
    intra_latency: tuple[float, float] = _DEFAULT_INTRA
    inter_latency: tuple[float, float] = _DEFAULT_INTER
    bandwidth: tuple[float, float] = _DEFAULT_BANDWIDTH
    capacity: float | None = None
    slowdown: tuple[float, float] | None = None
    seed: int | None = None

    def __post_init__(self) -> None:
        if self.node_count < 2:
            raise ClusterError("recipe needs node_count >= 2")
        if isinstance(self.locations, int):
            if self.locations < 1:
                raise ClusterError("recipe needs at least one location")
        elif not self.locations:
            raise ClusterError("recipe needs at least one location")
        if self.node_class not in _NODE_CLASSES:
            raise ClusterError(
                f"unknown node class {self.node_class!r}; expected one of {sorted(_NODE_CLASSES)}"
            )
        for lo, hi in (self.intra_latency, self.inter_latency, self.bandwidth):
            if not (0 < lo <= hi):
                raise ClusterError("latency/bandwidth ranges must satisfy 0 < lo <= hi")
        if len(self.location_labels) > 1 and self.intra_latency[1] >= self.inter_latency[0]:
            raise ClusterError("intra-cluster latency range must sit below the inter-cluster range")
        if self.capacity is not None:
            cap = self.capacity
            if cap != math.inf and (cap < 1 or int(cap) != cap):
                raise ClusterError("recipe capacity override must be a positive integer or inf")
        if self.slowdown is not None:
            lo, hi = self.slowdown
            if not (1.0 <= lo <= hi):
                raise ClusterError("recipe slowdown override must satisfy 1 <= lo <= hi")

    @property
    def location_labels(self) -> list[str]:
        if isinstance(self.locations, int):
            return [f"loc{i}" for i in range(self.locations)]
        return list(self.locations)


@dataclass
class SynthesizedCluster:
    cluster: ClusterModel
    snapshot: ResourceSnapshot
    probe_samples: dict[tuple[int, int], list[tuple[float, float]]] = field(repr=False)


def synth_cluster(recipe: ClusterRecipe, seed: int) -> SynthesizedCluster:
    """Deterministically synthesize a cluster from a recipe and a seed.

    Locations are assigned round-robin so every label is populated. Base
    latency between co-located nodes is drawn from the intra range, otherwise
    from the inter range; the linear term comes from a drawn bandwidth and
    the quadratic term stays small. Node speed reflects background load: a
    node busy with other work (high cpu/memory usage in the snapshot) runs
    proportionally slower. The recipe's capacity and slowdown overrides, when
    set, replace the per-class draws. Home is node 0. Also returns exact probe
    samples at PROBE_SIZES per pair, suitable for refitting the same model.
    """
    rng = random.Random(seed)
    labels = recipe.location_labels
    preset = _NODE_CLASSES[recipe.node_class]

    nodes: list[Ncp] = []
    cpu: dict[int, float] = {}
    mem: dict[int, float] = {}
    for i in range(recipe.node_count):
        cpu[i] = rng.random()
        mem[i] = rng.random()
        raw_speed = rng.uniform(*preset["speed"])
        if recipe.capacity is not None:
            capacity = recipe.capacity
        else:
            capacity = float(rng.randint(int(preset["capacity"][0]), int(preset["capacity"][1])))
        slowdown = rng.uniform(*(recipe.slowdown or preset["slowdown"]))
        load = (cpu[i] + mem[i]) / 2.0
        nodes.append(
            Ncp(
                index=i,
                location=labels[i % len(labels)],
                speed_factor=raw_speed * (1.0 - _USAGE_SPEED_WEIGHT * load),
                container_capacity=capacity,
                overload_slowdown=slowdown,
            )
        )

    coeff: dict[tuple[int, int], tuple[float, float, float]] = {}
    probes: dict[tuple[int, int], list[tuple[float, float]]] = {}
    for i in range(recipe.node_count):
        for j in range(recipe.node_count):
            if i == j:
                continue
            if nodes[i].location == nodes[j].location:
                p = rng.uniform(*recipe.intra_latency)
            else:
                p = rng.uniform(*recipe.inter_latency)
            q = 1.0 / rng.uniform(*recipe.bandwidth)
            r = rng.uniform(0.0, _CURVATURE_MAX)
            coeff[(i, j)] = (p, q, r)
            probes[(i, j)] = [(f, p + q * f + r * f * f) for f in PROBE_SIZES]

    latency = LatencyModel(recipe.node_count, coeff)
    cluster = ClusterModel(nodes, latency, home=0)
    return SynthesizedCluster(cluster, ResourceSnapshot(cpu, mem), probes)


def parse_recipe(text: str) -> ClusterRecipe:
    """Parse a cluster recipe document ([cluster] section, key = value lines)."""
    parser = configparser.ConfigParser()
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ClusterError(f"bad recipe: {exc}") from None
    if not parser.has_section("cluster"):
        raise ClusterError("recipe is missing the [cluster] section")
    sec = parser["cluster"]
    try:
        node_count = sec.getint("nodes")
    except (ValueError, TypeError):
        raise ClusterError("recipe: nodes must be an integer") from None
    if node_count is None:
        raise ClusterError("recipe: nodes is required")

    locations: int | list[str]
    raw_loc = sec.get("locations", "1").strip()
    if raw_loc.isdigit():
        locations = int(raw_loc)
    else:
        locations = [piece.strip() for piece in raw_loc.split(",") if piece.strip()]

    kwargs: dict = {
        "node_count": node_count,
        "locations": locations,
        "node_class": sec.get("class", "rpi-like").strip(),
    }

    def _pair(key: str) -> tuple[float, float] | None:
        raw = sec.get(key)
        if raw is None:
            return None
        parts = [piece.strip() for piece in raw.split(",")]
        if len(parts) != 2:
            raise ClusterError(f"recipe: {key} must be 'low, high'")
        try:
            return (float(parts[0]), float(parts[1]))
        except ValueError:
            raise ClusterError(f"recipe: {key} must be numeric") from None

    for key, attr in (
        ("intra_latency", "intra_latency"),
        ("inter_latency", "inter_latency"),
        ("bandwidth", "bandwidth"),
        ("slowdown", "slowdown"),
    ):
        pair = _pair(key)
        if pair is not None:
            kwargs[attr] = pair
    raw_cap = sec.get("capacity")
    if raw_cap is not None:
        raw_cap = raw_cap.strip()
        try:
            kwargs["capacity"] = math.inf if raw_cap == "inf" else float(int(raw_cap))
        except ValueError:
            raise ClusterError("recipe: capacity must be an integer or 'inf'") from None
    if sec.get("seed") is not None:
        try:
            kwargs["seed"] = sec.getint("seed")
        except ValueError:
            raise ClusterError("recipe: seed must be an integer") from None
    return ClusterRecipe(**kwargs)
