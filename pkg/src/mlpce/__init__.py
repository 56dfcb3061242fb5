"""Multi-layer path computation over an auxiliary graph."""

from __future__ import annotations

from .graph import AuxEdge, AuxGraph, AuxNode, BuildError, EdgeKind, NodeKind, build_auxiliary_graph
from .model import (
    CapacityPool,
    LayerRate,
    Link,
    Network,
    NetworkElement,
    RateKind,
    TechLayer,
    Technology,
    Topology,
    TopologyKind,
    capacity_feasible,
    consume,
    restore,
)
from .paths import (
    Path,
    ProtectedPath,
    dijkstra_shortest_path,
    expand_special_edge,
    explore_edge,
    find_lpp,
    find_unprotected_path,
    yen_k_shortest,
)
from .provisioner import PathType, ProvisioningResult, Provisioner, ServiceRequest, check_and_create_logical_links
from .weights import Scheme, WeightParams, dynamic_weight

__version__ = "0.1.0"

__all__ = [
    "AuxEdge",
    "AuxGraph",
    "AuxNode",
    "BuildError",
    "CapacityPool",
    "EdgeKind",
    "LayerRate",
    "Link",
    "Network",
    "NetworkElement",
    "NodeKind",
    "Path",
    "PathType",
    "ProtectedPath",
    "ProvisioningResult",
    "Provisioner",
    "RateKind",
    "Scheme",
    "ServiceRequest",
    "TechLayer",
    "Technology",
    "Topology",
    "TopologyKind",
    "WeightParams",
    "build_auxiliary_graph",
    "capacity_feasible",
    "check_and_create_logical_links",
    "consume",
    "dijkstra_shortest_path",
    "dynamic_weight",
    "expand_special_edge",
    "explore_edge",
    "find_lpp",
    "find_unprotected_path",
    "restore",
    "yen_k_shortest",
]
