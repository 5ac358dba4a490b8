"""Experiment orchestration: configs, runs, comparisons, scaling sweeps.

An experiment pairs one workload DAG with one cluster recipe and measures a
set of mappers over seeded repetitions. Each repetition synthesizes a fresh
cluster, execution profile, and input schedule from seeds derived off the
experiment seed, and every mapper sees the identical instance, so mapper
results within a repetition are directly comparable. All randomness is
derived deterministically; running the same config twice produces a
byte-identical bundle.
"""

from __future__ import annotations

import configparser
import dataclasses
import hashlib
import json
import random
import statistics
from dataclasses import dataclass, field
from pathlib import Path

from . import report
from .cluster import (
    ClusterError,
    ClusterRecipe,
    parse_recipe,
    profile_execution,
    synth_cluster,
)
from .dag import DagError, TaskDag, dnad_fixture, parse_dag, serialize_dag
from .dispatch import REFERENCE_SIZE, InputSchedule, simulate, validate_trace
from .heft import heft_map, mapping_cost_heft
from .placement import validate_placement
from .wave import (
    DEFAULT_CONTROL_PAYLOAD,
    DEFAULT_HOP_DELAY,
    DEFAULT_PROBE_SIZE,
    GreedyParams,
    wave_greedy,
    wave_random,
)

MAPPER_NAMES = ("heft", "heft_capped", "wave_random", "wave_greedy")


class ConfigError(ValueError):
    """An experiment configuration is invalid or inconsistent."""


class InvariantError(RuntimeError):
    """An internal consistency check failed during a run."""


def derive_seed(base: int, *parts) -> int:
    """Stable sub-seed from a base seed and a label path."""
    text = str(base) + "/" + "/".join(str(p) for p in parts)
    digest = hashlib.sha256(text.encode()).digest()
    return int.from_bytes(digest[:8], "big")


@dataclass(frozen=True)
class MapperSpec:
    name: str
    cap: int | None = None

    def __post_init__(self) -> None:
        if self.name not in MAPPER_NAMES:
            raise ConfigError(f"unknown mapper {self.name!r}; expected one of {MAPPER_NAMES}")
        if self.name == "heft_capped":
            if self.cap is None or self.cap < 1:
                raise ConfigError("heft_capped needs a positive per-node cap, e.g. heft_capped:2")
        elif self.cap is not None:
            raise ConfigError(f"mapper {self.name} does not take a cap")

    @property
    def label(self) -> str:
        return self.name if self.cap is None else f"{self.name}_{self.cap}"

    @classmethod
    def parse(cls, token: str) -> "MapperSpec":
        token = token.strip()
        if ":" in token:
            name, _, raw_cap = token.partition(":")
            try:
                cap = int(raw_cap)
            except ValueError:
                raise ConfigError(f"mapper cap must be an integer: {token!r}") from None
            return cls(name.strip(), cap)
        return cls(token)


@dataclass
class ScheduleSpec:
    count: int = 10
    size: float | None = 100_000.0
    size_range: tuple[float, float] | None = None
    interval: float = 1.0
    start: float = 0.0

    def __post_init__(self) -> None:
        if self.count < 1:
            raise ConfigError("schedule needs at least one file")
        if (self.size is None) == (self.size_range is None):
            raise ConfigError("schedule needs exactly one of size / size_range")
        if self.size is not None and self.size <= 0:
            raise ConfigError("schedule size must be positive")
        if self.size_range is not None and not (0 < self.size_range[0] <= self.size_range[1]):
            raise ConfigError("schedule size_range must satisfy 0 < low <= high")
        if self.interval < 0 or self.start < 0:
            raise ConfigError("schedule interval/start must be non-negative")

    def build(self, seed: int) -> InputSchedule:
        from .dispatch import InputFile

        if self.size is not None:
            return InputSchedule.uniform(self.count, self.size, self.interval, self.start)
        rng = random.Random(seed)
        files = [
            InputFile(s, rng.uniform(*self.size_range), self.start + s * self.interval)
            for s in range(self.count)
        ]
        return InputSchedule(files)

    def fingerprint(self) -> dict:
        return {
            "count": self.count,
            "size": self.size,
            "size_range": list(self.size_range) if self.size_range else None,
            "interval": self.interval,
            "start": self.start,
        }


@dataclass
class ExperimentConfig:
    dag_path: str
    cluster_path: str
    mappers: list[MapperSpec]
    repetitions: int = 1
    seed: int | None = None
    schedule: ScheduleSpec = field(default_factory=ScheduleSpec)
    base_cost_range: tuple[float, float] = (2.0, 6.0)
    greedy: GreedyParams = field(default_factory=GreedyParams)
    probe_size: float = DEFAULT_PROBE_SIZE
    control_payload: float = DEFAULT_CONTROL_PAYLOAD
    hop_delay: float = DEFAULT_HOP_DELAY
    heft_payload: float = 10_000.0
    heft_epsilon: float = 1e-3
    reference_size: float = REFERENCE_SIZE
    out_dir: str = "results"
    verbose_events: bool = False
    base_dir: Path = field(default_factory=Path.cwd)

    def __post_init__(self) -> None:
        if not self.mappers:
            raise ConfigError("config lists no mappers")
        if len({m.label for m in self.mappers}) != len(self.mappers):
            raise ConfigError("duplicate mapper entries")
        if self.repetitions < 1:
            raise ConfigError("repetitions must be >= 1")
        if not (0 < self.base_cost_range[0] <= self.base_cost_range[1]):
            raise ConfigError("base_cost_range must satisfy 0 < low <= high")

    def load_dag(self) -> TaskDag:
        if self.dag_path == "dnad":
            return dnad_fixture()
        path = self.base_dir / self.dag_path
        try:
            return parse_dag(path.read_text())
        except FileNotFoundError:
            raise ConfigError(f"dag file not found: {path}") from None

    def load_recipe(self) -> tuple[ClusterRecipe, str]:
        path = self.base_dir / self.cluster_path
        try:
            text = path.read_text()
        except FileNotFoundError:
            raise ConfigError(f"cluster recipe not found: {path}") from None
        return parse_recipe(text), text

    def effective_seed(self, recipe: ClusterRecipe) -> int:
        if self.seed is not None:
            return self.seed
        if recipe.seed is not None:
            return recipe.seed
        return 0


def _get_pair(section, key: str) -> tuple[float, float] | None:
    raw = section.get(key)
    if raw is None:
        return None
    parts = [p.strip() for p in raw.split(",")]
    if len(parts) != 2:
        raise ConfigError(f"{key} must be 'low, high'")
    try:
        return (float(parts[0]), float(parts[1]))
    except ValueError:
        raise ConfigError(f"{key} must be numeric") from None


def load_config(path: str | Path) -> ExperimentConfig:
    """Read an experiment config (INI format) from disk.

    Relative dag/cluster paths are resolved against the config file's
    directory. Only [experiment] with dag, cluster, and mappers is required;
    everything else has defaults.
    """
    path = Path(path)
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        text = path.read_text()
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"bad config: {exc}") from None
    if not parser.has_section("experiment"):
        raise ConfigError("config is missing the [experiment] section")
    exp = parser["experiment"]
    for key in ("dag", "cluster", "mappers"):
        if not exp.get(key):
            raise ConfigError(f"[experiment] {key} is required")

    mappers = [MapperSpec.parse(tok) for tok in exp["mappers"].split(",") if tok.strip()]

    kwargs: dict = {
        "dag_path": exp["dag"].strip(),
        "cluster_path": exp["cluster"].strip(),
        "mappers": mappers,
        "base_dir": path.resolve().parent,
    }
    try:
        if exp.get("repetitions") is not None:
            kwargs["repetitions"] = exp.getint("repetitions")
        if exp.get("seed") is not None:
            kwargs["seed"] = exp.getint("seed")
    except ValueError:
        raise ConfigError("[experiment] repetitions/seed must be integers") from None
    if exp.get("out_dir"):
        kwargs["out_dir"] = exp["out_dir"].strip()
    if exp.get("verbose_events") is not None:
        kwargs["verbose_events"] = exp.getboolean("verbose_events")

    if parser.has_section("schedule"):
        sec = parser["schedule"]
        sched_kwargs: dict = {}
        try:
            if sec.get("files") is not None:
                sched_kwargs["count"] = sec.getint("files")
            if sec.get("interval") is not None:
                sched_kwargs["interval"] = sec.getfloat("interval")
            if sec.get("start") is not None:
                sched_kwargs["start"] = sec.getfloat("start")
            if sec.get("size") is not None:
                sched_kwargs["size"] = sec.getfloat("size")
        except ValueError:
            raise ConfigError("[schedule] values must be numeric") from None
        size_range = _get_pair(sec, "size_range")
        if size_range is not None:
            sched_kwargs["size_range"] = size_range
            sched_kwargs.setdefault("size", None)
        kwargs["schedule"] = ScheduleSpec(**sched_kwargs)

    if parser.has_section("costs"):
        pair = _get_pair(parser["costs"], "base_cost_range")
        if pair is not None:
            kwargs["base_cost_range"] = pair

    if parser.has_section("greedy"):
        sec = parser["greedy"]
        try:
            k = sec.getfloat("k", 15.0)
        except ValueError:
            raise ConfigError("[greedy] k must be numeric") from None
        weights_raw = sec.get("weights")
        if weights_raw is not None:
            parts = [p.strip() for p in weights_raw.split(",")]
            if len(parts) != 3:
                raise ConfigError("[greedy] weights must be three comma-separated numbers")
            try:
                wd, wc, wm = (float(p) for p in parts)
            except ValueError:
                raise ConfigError("[greedy] weights must be numeric") from None
            kwargs["greedy"] = GreedyParams.normalized(k, wd, wc, wm)
        else:
            kwargs["greedy"] = GreedyParams(k=k)
        if sec.get("probe_size") is not None:
            kwargs["probe_size"] = sec.getfloat("probe_size")

    if parser.has_section("protocol"):
        sec = parser["protocol"]
        try:
            if sec.get("control_payload") is not None:
                kwargs["control_payload"] = sec.getfloat("control_payload")
            if sec.get("hop_delay") is not None:
                kwargs["hop_delay"] = sec.getfloat("hop_delay")
            if sec.get("heft_payload") is not None:
                kwargs["heft_payload"] = sec.getfloat("heft_payload")
            if sec.get("heft_epsilon") is not None:
                kwargs["heft_epsilon"] = sec.getfloat("heft_epsilon")
        except ValueError:
            raise ConfigError("[protocol] values must be numeric") from None

    if parser.has_section("simulation"):
        sec = parser["simulation"]
        try:
            if sec.get("reference_size") is not None:
                kwargs["reference_size"] = sec.getfloat("reference_size")
        except ValueError:
            raise ConfigError("[simulation] values must be numeric") from None

    try:
        return ExperimentConfig(**kwargs)
    except (ValueError, TypeError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from None


def _draw_costs(dag: TaskDag, cost_range: tuple[float, float], seed: int) -> dict[str, float]:
    rng = random.Random(seed)
    return {task: rng.uniform(*cost_range) for task in dag.tasks}


def _manifest(config: ExperimentConfig, dag: TaskDag, recipe_text: str, seed: int) -> dict:
    g = config.greedy
    return {
        "dag_sha256": hashlib.sha256(serialize_dag(dag).encode()).hexdigest(),
        "recipe_sha256": hashlib.sha256(recipe_text.encode()).hexdigest(),
        "seed": seed,
        "repetitions": config.repetitions,
        "schedule": config.schedule.fingerprint(),
        "base_cost_range": list(config.base_cost_range),
        "reference_size": config.reference_size,
        "greedy": {
            "k": g.k,
            "weights": [g.weight_delay, g.weight_cpu, g.weight_mem],
            "probe_size": config.probe_size,
        },
        "protocol": {
            "control_payload": config.control_payload,
            "hop_delay": config.hop_delay,
            "heft_payload": config.heft_payload,
            "heft_epsilon": config.heft_epsilon,
        },
        "mappers": [m.label for m in config.mappers],
    }


def _fingerprint(manifest: dict) -> str:
    core = {k: v for k, v in manifest.items() if k != "mappers"}
    return hashlib.sha256(json.dumps(core, sort_keys=True).encode()).hexdigest()


def _write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    tmp.replace(path)


def run_experiment(config: ExperimentConfig, out_dir: str | Path | None = None) -> Path:
    """Run every mapper over every repetition and write the result bundle.

    The bundle contains raw per-sequence makespans, mapping runtimes, a
    summary table, per-repetition placements (plus protocol traces for the
    decentralized mappers and event logs when verbose), a manifest
    fingerprinting the instance, and rendered figures. Returns the bundle
    directory.
    """
    dag = config.load_dag()
    recipe, recipe_text = config.load_recipe()
    seed = config.effective_seed(recipe)
    bundle = Path(out_dir) if out_dir is not None else config.base_dir / config.out_dir
    bundle.mkdir(parents=True, exist_ok=True)

    makespan_rows: list[tuple] = []  # mapper, rep, seq, seconds
    runtime_rows: list[tuple] = []  # mapper, rep, seconds

    for rep in range(config.repetitions):
        synth = synth_cluster(recipe, derive_seed(seed, "cluster", rep))
        cluster, snapshot = synth.cluster, synth.snapshot
        costs = _draw_costs(dag, config.base_cost_range, derive_seed(seed, "costs", rep))
        profile = profile_execution(dag, cluster, costs)
        schedule = config.schedule.build(derive_seed(seed, "schedule", rep))

        for mapper in config.mappers:
            trace = None
            if mapper.name == "heft":
                placement = heft_map(dag, cluster, profile)
                runtime = mapping_cost_heft(
                    cluster, dag.num_tasks, config.heft_payload, config.heft_epsilon
                )
            elif mapper.name == "heft_capped":
                placement = heft_map(dag, cluster, profile, cap=mapper.cap)
                runtime = mapping_cost_heft(
                    cluster, dag.num_tasks, config.heft_payload, config.heft_epsilon
                )
            elif mapper.name == "wave_random":
                placement, trace = wave_random(
                    dag,
                    cluster,
                    derive_seed(seed, "wave_random", rep),
                    config.control_payload,
                    config.hop_delay,
                )
                runtime = trace.completion_time
            else:  # wave_greedy
                placement, trace = wave_greedy(
                    dag,
                    cluster,
                    snapshot,
                    config.greedy,
                    config.probe_size,
                    config.control_payload,
                    config.hop_delay,
                )
                runtime = trace.completion_time

            plan_problems = validate_placement(placement, dag, cluster, profile)
            if plan_problems:
                raise InvariantError(
                    f"{mapper.label} rep {rep}: invalid placement: " + "; ".join(plan_problems)
                )

            sim = simulate(dag, placement, cluster, profile, schedule, config.reference_size)
            violations = validate_trace(
                sim, dag, placement, cluster, profile, schedule, config.reference_size
            )
            if violations:
                lines = "; ".join(
                    f"{v.category}[{v.task}/{v.seq}]: {v.detail}" for v in violations[:5]
                )
                raise InvariantError(f"{mapper.label} rep {rep}: trace violations: {lines}")

            for s in sorted(sim.makespans):
                makespan_rows.append((mapper.label, rep, s, sim.makespans[s]))
            runtime_rows.append((mapper.label, rep, runtime))

            detail = bundle / "detail" / mapper.label / f"rep_{rep:03d}"
            report.write_csv(
                detail / "placement.csv",
                ["task", "node", "start", "finish"],
                placement.csv_rows(),
            )
            if trace is not None:
                report.write_csv(
                    detail / "trace.csv",
                    ["time", "kind", "sender", "receiver", "task"],
                    trace.csv_rows(),
                )
            if config.verbose_events:
                report.write_csv(
                    detail / "events.csv",
                    ["time", "kind", "task", "node", "seq"],
                    [(e.time, e.kind, e.task, e.node, e.seq) for e in sim.events],
                )

    report.write_csv(
        bundle / "makespans.csv",
        ["mapper", "rep", "seq", "makespan_seconds"],
        makespan_rows,
    )
    report.write_csv(
        bundle / "mapping_runtimes.csv",
        ["mapper", "rep", "runtime_seconds"],
        runtime_rows,
    )

    summary_rows = []
    for mapper in config.mappers:
        spans = [row[3] for row in makespan_rows if row[0] == mapper.label]
        runtimes = [row[2] for row in runtime_rows if row[0] == mapper.label]
        summary_rows.append(
            (
                mapper.label,
                config.repetitions,
                config.schedule.count,
                statistics.fmean(spans),
                statistics.pstdev(spans),
                statistics.fmean(runtimes),
                statistics.pstdev(runtimes),
            )
        )
    report.write_csv(
        bundle / "summary.csv",
        [
            "mapper",
            "repetitions",
            "files",
            "makespan_mean",
            "makespan_std",
            "mapping_runtime_mean",
            "mapping_runtime_std",
        ],
        summary_rows,
    )

    manifest = _manifest(config, dag, recipe_text, seed)
    manifest["fingerprint"] = _fingerprint(manifest)
    _write_text(bundle / "manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")

    per_seq: dict[str, dict[int, float]] = {}
    for mapper in config.mappers:
        series: dict[int, list[float]] = {}
        for label, _rep, s, value in makespan_rows:
            if label == mapper.label:
                series.setdefault(s, []).append(value)
        per_seq[mapper.label] = {s: statistics.fmean(vals) for s, vals in series.items()}
    report.makespan_figure(per_seq, bundle / "figures" / "makespans.png")
    report.summary_figure(
        [(row[0], row[3], row[4]) for row in summary_rows],
        bundle / "figures" / "summary.png",
    )
    return bundle


def compare_report(
    bundles: list[str | Path],
    out_dir: str | Path | None = None,
) -> list[tuple]:
    """Rank mappers across result bundles of the identical instance.

    Rows come back as (rank, mapper, makespan_mean, makespan_std,
    mapping_runtime_mean), ascending by mean makespan with ties broken by
    mapper name. When ``out_dir`` is given, also writes ranking.csv and a
    comparison figure there. Bundles with different instance fingerprints
    are rejected.
    """
    if len(bundles) < 2:
        raise ConfigError("compare needs at least two bundles")
    fingerprints = []
    data: dict[str, tuple[list[float], list[float]]] = {}
    for bundle in bundles:
        bundle = Path(bundle)
        try:
            manifest = json.loads((bundle / "manifest.json").read_text())
        except FileNotFoundError:
            raise ConfigError(f"{bundle} is not a result bundle (no manifest.json)") from None
        fingerprints.append(manifest.get("fingerprint"))
        _, makespan_data = report.read_csv(bundle / "makespans.csv")
        _, runtime_data = report.read_csv(bundle / "mapping_runtimes.csv")
        for mapper, _rep, _seq, value in makespan_data:
            data.setdefault(mapper, ([], []))[0].append(float(value))
        for mapper, _rep, value in runtime_data:
            data.setdefault(mapper, ([], []))[1].append(float(value))
    if len(set(fingerprints)) != 1 or fingerprints[0] is None:
        raise ConfigError("bundles describe different instances; refusing to compare")

    ranked = sorted(
        (statistics.fmean(spans), mapper) for mapper, (spans, _) in data.items() if spans
    )
    rows = []
    for rank, (mean, mapper) in enumerate(ranked, start=1):
        spans, runtimes = data[mapper]
        rows.append(
            (
                rank,
                mapper,
                mean,
                statistics.pstdev(spans),
                statistics.fmean(runtimes) if runtimes else float("nan"),
            )
        )
    if out_dir is not None:
        out = Path(out_dir)
        report.write_csv(
            out / "ranking.csv",
            ["rank", "mapper", "makespan_mean", "makespan_std", "mapping_runtime_mean"],
            rows,
        )
        report.summary_figure(
            [(row[1], row[2], row[3]) for row in rows],
            out / "figures" / "comparison.png",
            title="Mapper comparison",
        )
    return rows


def scaling_sweep(
    config: ExperimentConfig,
    node_counts: list[int],
    out_dir: str | Path | None = None,
) -> list[tuple]:
    """Measure mapping runtime for each mapper across cluster sizes.

    For every node count the cluster recipe is re-synthesized per repetition
    and only the mapping stage runs (no dispatch simulation). Returns rows
    (mapper, nodes, runtime_mean, runtime_std) and, when ``out_dir`` is
    given, writes sweep.csv plus a runtime-vs-nodes figure.
    """
    if not node_counts:
        raise ConfigError("sweep needs a non-empty node list")
    if sorted(set(node_counts)) != list(node_counts):
        raise ConfigError("sweep node counts must be strictly increasing")

    dag = config.load_dag()
    recipe, _recipe_text = config.load_recipe()
    seed = config.effective_seed(recipe)

    rows: list[tuple] = []
    series: dict[str, list[tuple[int, float]]] = {}
    for n in node_counts:
        sized = dataclasses.replace(recipe, node_count=n)
        per_mapper: dict[str, list[float]] = {m.label: [] for m in config.mappers}
        for rep in range(config.repetitions):
            synth = synth_cluster(sized, derive_seed(seed, "cluster", n, rep))
            cluster, snapshot = synth.cluster, synth.snapshot
            for mapper in config.mappers:
                if mapper.name in ("heft", "heft_capped"):
                    runtime = mapping_cost_heft(
                        cluster, dag.num_tasks, config.heft_payload, config.heft_epsilon
                    )
                elif mapper.name == "wave_random":
                    _, trace = wave_random(
                        dag,
                        cluster,
                        derive_seed(seed, "wave_random", n, rep),
                        config.control_payload,
                        config.hop_delay,
                    )
                    runtime = trace.completion_time
                else:
                    _, trace = wave_greedy(
                        dag,
                        cluster,
                        snapshot,
                        config.greedy,
                        config.probe_size,
                        config.control_payload,
                        config.hop_delay,
                    )
                    runtime = trace.completion_time
                per_mapper[mapper.label].append(runtime)
        for mapper in config.mappers:
            values = per_mapper[mapper.label]
            mean = statistics.fmean(values)
            rows.append((mapper.label, n, mean, statistics.pstdev(values)))
            series.setdefault(mapper.label, []).append((n, mean))

    if out_dir is not None:
        out = Path(out_dir)
        report.write_csv(
            out / "sweep.csv",
            ["mapper", "nodes", "runtime_mean", "runtime_std"],
            rows,
        )
        report.sweep_figure(series, out / "figures" / "sweep.png")
    return rows
