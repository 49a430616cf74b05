"""Static-snapshot MANET simulator.

Unit-disk topologies with Gabriel planarization, greedy/perimeter
geographic forwarding, a hashed-home-server location service baseline,
profile-driven first-packet delivery, and scenario orchestration with
reproducible metrics.
"""

from .topology import Topology, build_topology, topology_from_positions
from .gpsr import RouteResult, default_ttl, gpsr_route
from .delivery import (
    DeliveryOutcome,
    GhlsBinding,
    build_ghls_binding,
    candidates_from_profile,
    ghls_deliver,
    ghls_query,
    ghls_update,
    lpr_deliver,
)
from .scenario import (
    GhlsComparison,
    MetricsRecord,
    ScenarioConfig,
    TrialRow,
    compare_ghls,
    load_scenario,
    run_scenario,
)

__all__ = [
    "Topology",
    "build_topology",
    "topology_from_positions",
    "RouteResult",
    "default_ttl",
    "gpsr_route",
    "DeliveryOutcome",
    "GhlsBinding",
    "build_ghls_binding",
    "candidates_from_profile",
    "ghls_deliver",
    "ghls_query",
    "ghls_update",
    "lpr_deliver",
    "GhlsComparison",
    "MetricsRecord",
    "ScenarioConfig",
    "TrialRow",
    "compare_ghls",
    "load_scenario",
    "run_scenario",
]
