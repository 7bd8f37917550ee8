"""Clustered product-overlay publish/subscribe engine with a deterministic
network simulator and an experiment harness."""

from .graphs import (
    Graph,
    GraphError,
    ProductVertex,
    build_graph,
    cartesian_product,
    connectivity_bounds,
    diameter,
    edge_connectivity,
    load_graph_file,
    parse_graph_text,
    vertex_connectivity,
)
from .topology import (
    BrokerId,
    NeighbourInfo,
    ScotTopology,
    ScotValidationError,
    Violation,
    build_preset,
    build_scot,
    parse_broker,
    preset_factors,
    validate_factors,
)
from .messages import (
    A_CXT,
    P_CXT,
    S_CXT,
    Advertisement,
    CibClearMsg,
    CibSetMsg,
    Civ,
    FilterError,
    FilterTypeError,
    Notification,
    Predicate,
    Subscription,
    civ_make,
    civ_set_bit,
    matches,
    overlaps,
    parse_filter,
    payload_satisfies,
)
from .broker import (
    Deliver,
    LstEntry,
    PrtEntry,
    RoutingError,
    RoutingStepStats,
    ScotBroker,
    Send,
    SrtEntry,
    is_congested,
)
from .baseline import TidBroker, TidPrtEntry, TidSrtEntry
from .simnet import CongestionInjection, Network, RoutingLoopError, SimBudgetError
from .metrics import MetricsCollector, MetricsReport, WorkloadMismatchError, compare_runs
from .scenario import (
    ConfigError,
    InjectionSpec,
    ScenarioConfig,
    burst_scenario,
    congestion_case_scenario,
    run_comparison,
    run_scenario,
    single_advertisement_scenario,
    static_routing_walkthrough,
)
from .workload import Workload, generate_workload, measured_selectivity

__version__ = "0.1.0"
