"""Edge inference scheduling: desk-scale simulator, static policies, RL meta-scheduler."""

from .catalog import (
    Catalog,
    CatalogError,
    ModelSpec,
    ResourceVector,
    TaskKind,
    VariantSpec,
    default_catalog,
    effective_capacity,
    fractional_load,
    load_catalog,
    processing_delay,
)
from .policies import Assignment, PolicyKind, SystemView, apply_policy, feasible_set, policy_names
from .simulator import EpisodeConfig, EpisodeResult, FixedPolicy, MetricsWindow, run_episode
from .topology import (
    ClusterSpec,
    Layer,
    PathStats,
    SchedulerSite,
    Topology,
    Worker,
    build_preset,
    deploy_workers,
    load_topology,
    pessimistic_rtt,
    sample_network_delay,
)
from .workload import (
    DEFAULT_APP_MIX,
    AppProfile,
    ClientGenerator,
    LambdaSchedule,
    Query,
    Stream,
    app_table,
    next_arrival,
    spawn_stream,
)

__version__ = "0.1.0"
