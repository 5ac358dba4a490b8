"""dispersim: task mapping and dispatch simulation for dispersed clusters."""

from .cluster import (
    ClusterError,
    ClusterModel,
    ClusterRecipe,
    ExecutionProfile,
    LatencyModel,
    Ncp,
    ResourceSnapshot,
    SynthesizedCluster,
    fit_latency_model,
    parse_recipe,
    profile_execution,
    synth_cluster,
)
from .dag import (
    DagError,
    Edge,
    TaskDag,
    dnad_fixture,
    parse_dag,
    serialize_dag,
    topological_order,
)
from .dispatch import (
    Activation,
    DispatchError,
    InputFile,
    InputSchedule,
    MakespanReport,
    Violation,
    brute_force_optimal,
    simulate,
    validate_trace,
)
from .experiment import (
    ConfigError,
    ExperimentConfig,
    InvariantError,
    MapperSpec,
    ScheduleSpec,
    compare_report,
    derive_seed,
    load_config,
    run_experiment,
    scaling_sweep,
)
from .heft import InfeasibleCapError, heft_map, mapping_cost_heft, upward_rank
from .placement import Placement, validate_placement
from .wave import (
    HOME,
    GreedyParams,
    MappingTrace,
    TraceEvent,
    WaveError,
    feasible_set,
    neighbor_rank,
    place_inputs,
    select_controllers,
    simulate_mapping_runtime,
    wave_greedy,
    wave_random,
)

__version__ = "0.1.0"
