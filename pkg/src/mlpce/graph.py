"""Multi-layer auxiliary graph and its builder.

Each network element contributes one node per supported tech/layer and one
adaptation edge per declared (client, server) pair. Physical links join
nodes of the same tech/layer on different elements. Discovered logical
links and topology special edges are layered on top; dual-homing
topologies also add a hub node.

The graph is addressed by edge id and allows parallel edges. Alongside the
Python objects it keeps numpy mirrors of the fields the search kernels
read, updated in place as pools change.
"""

from __future__ import annotations

import copy
import enum
import hashlib
import itertools
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .model import (
    CONTAINER_RATES,
    TL_CODES,
    CapacityPool,
    InterTechLink,
    Link,
    Network,
    TechLayer,
    Topology,
    TopologyKind,
    ValidationError,
    bottleneck_pool,
    chain_order,
    ring_order,
    validate_topology,
)
from .weights import WeightParams, assign_initial_weights


class BuildError(ValueError):
    """Raised when a network description cannot be turned into a graph."""


class NodeKind(str, enum.Enum):
    TECH_LAYER = "TECH_LAYER"
    HUB = "HUB"


class EdgeKind(str, enum.Enum):
    PHYSICAL = "PHYSICAL"
    LOGICAL = "LOGICAL"
    ADAPTATION = "ADAPTATION"
    RING_SPECIAL = "RING_SPECIAL"
    DH_SPECIAL = "DH_SPECIAL"
    DH_HUB_LEG = "DH_HUB_LEG"


SPECIAL_KINDS = frozenset({EdgeKind.RING_SPECIAL, EdgeKind.DH_SPECIAL, EdgeKind.DH_HUB_LEG})
_KIND_CODE = {k: i for i, k in enumerate(EdgeKind)}

# Created logical links get ids that sort after every generated id, so
# lexicographic ranks can be extended without a full re-sort.
LOGICAL_ID_PREFIX = "~L"


def node_id(ne: str, tl: TechLayer) -> str:
    return f"{ne}#{tl.technology.value}#{tl.layer}"


def hub_id(topology_id: str) -> str:
    return f"hub#{topology_id}"


@dataclass
class AuxNode:
    id: str
    kind: NodeKind
    ne_id: Optional[str] = None
    tech_layer: Optional[TechLayer] = None
    topology_id: Optional[str] = None


@dataclass
class AuxEdge:
    """One auxiliary-graph edge.

    ``u`` and ``v`` are node ids. Adaptation edges are stored as
    (client, server); ring special edges as (member, aggregate); dual-homing
    edges as (member, hub) and (hub, aggregate).
    """

    id: str
    u: str
    v: str
    kind: EdgeKind
    distance_km: float = 0.0
    pool: Optional[CapacityPool] = None
    self_protected: bool = False
    topology_id: Optional[str] = None
    srlg_ids: frozenset = field(default_factory=frozenset)
    underlying_path: Tuple[str, ...] = ()
    weight_initial: float = 0.0
    weight_dynamic: float = 0.0
    tech_layer: Optional[TechLayer] = None

    def other(self, node: str) -> str:
        if node == self.u:
            return self.v
        if node == self.v:
            return self.u
        raise KeyError(f"{node} is not an endpoint of {self.id}")

    @property
    def carries_capacity(self) -> bool:
        return self.pool is not None


class _Columns:
    """Growable per-edge numpy columns."""

    def __init__(self, capacity: int = 64) -> None:
        self.size = 0
        self._cap = capacity
        self.u = np.zeros(capacity, dtype=np.int64)
        self.v = np.zeros(capacity, dtype=np.int64)
        self.client = np.full(capacity, -1, dtype=np.int64)
        self.adapt = np.zeros(capacity, dtype=np.bool_)
        self.kind = np.zeros(capacity, dtype=np.int8)
        self.self_prot = np.zeros(capacity, dtype=np.bool_)
        self.has_pool = np.zeros(capacity, dtype=np.bool_)
        self.avail = np.zeros(capacity, dtype=np.float64)
        self.maxc = np.zeros(capacity, dtype=np.float64)
        self.cont = np.full((len(CONTAINER_RATES), capacity), -1, dtype=np.int64)
        self.w_init = np.zeros(capacity, dtype=np.float64)
        self.dist = np.zeros(capacity, dtype=np.float64)
        self.rank = np.zeros(capacity, dtype=np.int64)

    _FIELDS = ("u", "v", "client", "adapt", "kind", "self_prot", "has_pool", "avail", "maxc", "w_init", "dist", "rank")

    def grow(self) -> None:
        new_cap = self._cap * 2
        for name in self._FIELDS:
            arr = getattr(self, name)
            fill = -1 if name == "client" else 0
            out = np.full(new_cap, fill, dtype=arr.dtype)
            out[: self._cap] = arr
            setattr(self, name, out)
        cont = np.full((len(CONTAINER_RATES), new_cap), -1, dtype=np.int64)
        cont[:, : self._cap] = self.cont
        self.cont = cont
        self._cap = new_cap

    def append(self) -> int:
        if self.size == self._cap:
            self.grow()
        idx = self.size
        self.size += 1
        return idx

    def pop(self) -> None:
        self.size -= 1
        i = self.size
        for name in self._FIELDS:
            getattr(self, name)[i] = -1 if name == "client" else 0
        self.cont[:, i] = -1


@dataclass
class CSR:
    indptr: np.ndarray
    adj_edge: np.ndarray
    adj_node: np.ndarray


class AuxGraph:
    """The auxiliary graph.

    Attributes:
        nodes: Nodes in insertion order.
        edges: Edges in insertion order.
        srlgs: SRLG id to member edge ids.
        topologies: Topology id to its description.
        topology_nodes: Topology id to ordered node ids (ring order or chain
            order from the first aggregate).
        topology_links: Topology id to ordered member edge ids.
    """

    def __init__(self) -> None:
        self.nodes: List[AuxNode] = []
        self.edges: List[AuxEdge] = []
        self._node_index: Dict[str, int] = {}
        self._edge_index: Dict[str, int] = {}
        self._adjacency: List[List[int]] = []
        self.srlgs: Dict[str, set] = {}
        self.topologies: Dict[str, Topology] = {}
        self.topology_nodes: Dict[str, List[str]] = {}
        self.topology_links: Dict[str, List[str]] = {}
        self.topology_tech_layer: Dict[str, TechLayer] = {}
        self.logical_counter = 0
        self._cols = _Columns()
        self._node_code = np.zeros(64, dtype=np.int64)
        self._csr: Optional[CSR] = None
        self._max_id = ""
        self._ranks_valid = True

    # -- construction -----------------------------------------------------

    def add_node(self, node: AuxNode) -> AuxNode:
        if node.id in self._node_index:
            raise BuildError(f"duplicate node {node.id}")
        idx = len(self.nodes)
        self._node_index[node.id] = idx
        self.nodes.append(node)
        self._adjacency.append([])
        if idx >= self._node_code.shape[0]:
            grown = np.zeros(self._node_code.shape[0] * 2, dtype=np.int64)
            grown[:idx] = self._node_code[:idx]
            self._node_code = grown
        self._node_code[idx] = TL_CODES[node.tech_layer] if node.tech_layer is not None else 0
        self._csr = None
        return node

    def add_edge(self, edge: AuxEdge) -> AuxEdge:
        if edge.id in self._edge_index:
            raise BuildError(f"duplicate edge {edge.id}")
        try:
            iu = self._node_index[edge.u]
            iv = self._node_index[edge.v]
        except KeyError as exc:
            raise BuildError(f"edge {edge.id}: unknown endpoint {exc.args[0]}") from exc
        idx = self._cols.append()
        self._edge_index[edge.id] = idx
        self.edges.append(edge)
        self._adjacency[iu].append(idx)
        if iv != iu:
            self._adjacency[iv].append(idx)
        c = self._cols
        c.u[idx] = iu
        c.v[idx] = iv
        c.adapt[idx] = edge.kind is EdgeKind.ADAPTATION
        c.client[idx] = iu if edge.kind is EdgeKind.ADAPTATION else -1
        c.kind[idx] = _KIND_CODE[edge.kind]
        c.self_prot[idx] = edge.self_protected
        c.w_init[idx] = edge.weight_initial
        c.dist[idx] = edge.distance_km
        self._mirror_pool(idx, edge.pool)
        for sid in edge.srlg_ids:
            self.srlgs.setdefault(sid, set()).add(edge.id)
        if edge.id > self._max_id:
            self._max_id = edge.id
            c.rank[idx] = idx
        else:
            self._ranks_valid = False
        self._csr = None
        return edge

    def pop_edge(self, edge_id: str) -> AuxEdge:
        """Remove the most recently added edge (rollback of a creation)."""
        edge = self.edges[-1]
        if edge.id != edge_id:
            raise ValueError("only the most recently added edge can be removed")
        idx = len(self.edges) - 1
        ranks_stay_valid = self._ranks_valid and self._cols.rank[idx] == idx
        self.edges.pop()
        del self._edge_index[edge.id]
        self._adjacency[self._node_index[edge.u]].remove(idx)
        if edge.v != edge.u:
            self._adjacency[self._node_index[edge.v]].remove(idx)
        for sid in edge.srlg_ids:
            members = self.srlgs[sid]
            members.discard(edge.id)
            if not members:
                del self.srlgs[sid]
        self._cols.pop()
        self._max_id = max((e.id for e in self.edges), default="")
        self._ranks_valid = ranks_stay_valid
        self._csr = None
        return edge

    def _mirror_pool(self, idx: int, pool: Optional[CapacityPool]) -> None:
        c = self._cols
        if pool is None:
            c.has_pool[idx] = False
            c.avail[idx] = 0.0
            c.maxc[idx] = 0.0
            c.cont[:, idx] = -1
            return
        c.has_pool[idx] = True
        c.avail[idx] = float(pool.available_mbps)
        c.maxc[idx] = float(pool.max_mbps)
        c.cont[:, idx] = -1
        for kind, n in pool.containers:
            c.cont[CONTAINER_RATES.index(kind), idx] = n

    # -- access -------------------------------------------------------------

    def node(self, nid: str) -> AuxNode:
        return self.nodes[self._node_index[nid]]

    def edge(self, eid: str) -> AuxEdge:
        return self.edges[self._edge_index[eid]]

    def has_node(self, nid: str) -> bool:
        return nid in self._node_index

    def has_edge(self, eid: str) -> bool:
        return eid in self._edge_index

    def node_index(self, nid: str) -> int:
        return self._node_index[nid]

    def edge_index(self, eid: str) -> int:
        return self._edge_index[eid]

    def incident(self, nid: str) -> List[AuxEdge]:
        return [self.edges[i] for i in self._adjacency[self._node_index[nid]]]

    def edges_of_kind(self, *kinds: EdgeKind) -> List[AuxEdge]:
        return [e for e in self.edges if e.kind in kinds]

    def nodes_of_kind(self, kind: NodeKind) -> List[AuxNode]:
        return [n for n in self.nodes if n.kind is kind]

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    # -- mutation through pools and weights ----------------------------------

    def set_pool(self, eid: str, pool: CapacityPool) -> None:
        idx = self._edge_index[eid]
        edge = self.edges[idx]
        if edge.pool is None:
            raise ValidationError(f"edge {eid} carries no capacity")
        edge.pool = pool
        self._mirror_pool(idx, pool)

    def set_initial_weight(self, eid: str, weight: float) -> None:
        idx = self._edge_index[eid]
        self.edges[idx].weight_initial = weight
        self._cols.w_init[idx] = weight

    def set_dynamic_weights(self, weights: np.ndarray) -> None:
        for edge, w in zip(self.edges, weights.tolist()):
            edge.weight_dynamic = w

    # -- array views ---------------------------------------------------------

    def csr(self) -> CSR:
        """Node-to-incident-edge index, rebuilt lazily after edge changes."""
        if self._csr is None:
            n = self.n_nodes
            m = self.n_edges
            c = self._cols
            u = c.u[:m]
            v = c.v[:m]
            loops = u == v
            eids = np.arange(m, dtype=np.int64)
            ends = np.concatenate([u, v[~loops]])
            others = np.concatenate([v, u[~loops]])
            eall = np.concatenate([eids, eids[~loops]])
            order = np.lexsort((eall, ends))
            counts = np.bincount(ends, minlength=n)
            indptr = np.zeros(n + 1, dtype=np.int64)
            np.cumsum(counts, out=indptr[1:])
            self._csr = CSR(indptr, eall[order].astype(np.int64), others[order].astype(np.int64))
        return self._csr

    @property
    def node_codes(self) -> np.ndarray:
        return self._node_code[: self.n_nodes]

    def column(self, name: str) -> np.ndarray:
        """Live view of one per-edge column (``u``, ``avail``, ``w_init`` ...)."""
        if name == "rank":
            return self.edge_ranks()
        return getattr(self._cols, name)[: self.n_edges]

    def containers_column(self, kind) -> np.ndarray:
        return self._cols.cont[CONTAINER_RATES.index(kind), : self.n_edges]

    def edge_ranks(self) -> np.ndarray:
        """Rank of every edge id in lexicographic order."""
        m = self.n_edges
        if not self._ranks_valid:
            order = sorted(range(m), key=lambda i: self.edges[i].id)
            ranks = self._cols.rank
            for r, i in enumerate(order):
                ranks[i] = r
            self._ranks_valid = True
        return self._cols.rank[:m]

    def utilization(self) -> np.ndarray:
        m = self.n_edges
        maxc = self._cols.maxc[:m]
        avail = self._cols.avail[:m]
        out = np.zeros(m, dtype=np.float64)
        np.divide(maxc - avail, maxc, out=out, where=maxc > 0)
        return np.clip(out, 0.0, 1.0)

    # -- integrity -----------------------------------------------------------

    def check_adjacency(self) -> None:
        """Full rescan: the adjacency index mirrors the edge set exactly."""
        expected: List[List[int]] = [[] for _ in self.nodes]
        for i, e in enumerate(self.edges):
            iu = self._node_index[e.u]
            iv = self._node_index[e.v]
            expected[iu].append(i)
            if iv != iu:
                expected[iv].append(i)
        for nid, (have, want) in enumerate(zip(self._adjacency, expected)):
            if sorted(have) != sorted(want):
                raise AssertionError(f"adjacency mismatch at {self.nodes[nid].id}")
        if len(self._edge_index) != len(self.edges):
            raise AssertionError("edge index out of sync")

    def canonical_lines(self) -> Iterable[str]:
        for n in self.nodes:
            yield f"N|{n.id}|{n.kind.value}|{n.ne_id}|{n.tech_layer}|{n.topology_id}"
        for e in self.edges:
            pool = ""
            if e.pool is not None:
                pool = f"{e.pool.max_mbps}/{e.pool.available_mbps}/" + ",".join(
                    f"{k.value}:{n}" for k, n in e.pool.containers
                )
            yield (
                f"E|{e.id}|{e.u}|{e.v}|{e.kind.value}|{e.distance_km!r}|{pool}|{int(e.self_protected)}|"
                f"{e.topology_id}|{','.join(sorted(e.srlg_ids))}|{','.join(e.underlying_path)}|"
                f"{e.weight_initial!r}|{e.tech_layer}"
            )
        yield f"C|{self.logical_counter}"

    def digest(self) -> str:
        """Hash of the full graph state, pools and weights included."""
        h = hashlib.sha256()
        for line in self.canonical_lines():
            h.update(line.encode())
            h.update(b"\n")
        return h.hexdigest()

    def copy(self) -> "AuxGraph":
        dup = copy.copy(self)
        dup.nodes = [copy.copy(n) for n in self.nodes]
        dup.edges = [copy.copy(e) for e in self.edges]
        dup._node_index = dict(self._node_index)
        dup._edge_index = dict(self._edge_index)
        dup._adjacency = [list(a) for a in self._adjacency]
        dup.srlgs = {k: set(v) for k, v in self.srlgs.items()}
        dup.topologies = dict(self.topologies)
        dup.topology_nodes = {k: list(v) for k, v in self.topology_nodes.items()}
        dup.topology_links = {k: list(v) for k, v in self.topology_links.items()}
        dup.topology_tech_layer = dict(self.topology_tech_layer)
        dup._cols = copy.deepcopy(self._cols)
        dup._node_code = self._node_code.copy()
        dup._csr = self._csr
        return dup

    def counts(self) -> Dict[str, int]:
        out = {
            "tech_layer_nodes": 0,
            "hub_nodes": 0,
            "adaptation_edges": 0,
            "physical_links": 0,
            "logical_links": 0,
            "special_edges": 0,
        }
        for n in self.nodes:
            out["tech_layer_nodes" if n.kind is NodeKind.TECH_LAYER else "hub_nodes"] += 1
        for e in self.edges:
            if e.kind is EdgeKind.ADAPTATION:
                out["adaptation_edges"] += 1
            elif e.kind is EdgeKind.PHYSICAL:
                out["physical_links"] += 1
            elif e.kind is EdgeKind.LOGICAL:
                out["logical_links"] += 1
            else:
                out["special_edges"] += 1
        out["edges"] = self.n_edges
        return out


# ---------------------------------------------------------------------------
# Builder
# ---------------------------------------------------------------------------


def _adaptation_edge_id(ne: str, client: TechLayer, server: TechLayer) -> str:
    return f"A:{ne}:{client}>{server}"


def build_auxiliary_graph(network: Network, params: Optional[WeightParams] = None) -> AuxGraph:
    """Build the auxiliary graph of ``network`` and assign initial weights.

    Inputs are processed in id order so the result does not depend on the
    iteration order of the input collections.

    Raises:
        BuildError: on dangling link endpoints, unsupported ports or
            malformed topologies.
    """
    try:
        network.validate()
    except ValidationError as exc:
        raise BuildError(str(exc)) from exc

    graph = AuxGraph()
    for ne_id in sorted(network.elements):
        ne = network.elements[ne_id]
        for tl in sorted(ne.supported):
            graph.add_node(AuxNode(node_id(ne_id, tl), NodeKind.TECH_LAYER, ne_id, tl))
    for ne_id in sorted(network.elements):
        ne = network.elements[ne_id]
        for client, server in sorted(ne.adaptations):
            graph.add_edge(
                AuxEdge(
                    _adaptation_edge_id(ne_id, client, server),
                    node_id(ne_id, client),
                    node_id(ne_id, server),
                    EdgeKind.ADAPTATION,
                )
            )

    protected_links = {
        t.member_links[0]
        for t in network.topologies.values()
        if t.kind is TopologyKind.LINEAR_1P1
    }
    link_topology = {}
    for tid in sorted(network.topologies):
        for lid in network.topologies[tid].member_links:
            link_topology.setdefault(lid, tid)

    for lid in sorted(network.links):
        link = network.links[lid]
        for end in (link.a, link.b):
            ne = network.elements.get(end)
            if ne is None:
                raise BuildError(f"link {lid}: endpoint {end} does not exist")
            if link.tech_layer not in ne.supported:
                raise BuildError(f"link {lid}: {end} has no {link.tech_layer} port")
        if link.a == link.b:
            raise BuildError(f"link {lid}: both ends on {link.a}")
        graph.add_edge(
            AuxEdge(
                lid,
                node_id(link.a, link.tech_layer),
                node_id(link.b, link.tech_layer),
                EdgeKind.PHYSICAL,
                distance_km=float(link.distance_km),
                pool=link.pool(),
                self_protected=lid in protected_links,
                topology_id=link_topology.get(lid),
                srlg_ids=frozenset(link.srlg_ids),
                tech_layer=link.tech_layer,
            )
        )

    if network.inter_tech_links:
        trace_logical_links(graph, network.inter_tech_links.values())

    for tid in sorted(network.topologies):
        add_topology_edges(graph, network.topologies[tid], network.links)

    assign_initial_weights(graph, params or WeightParams())
    return graph


def trace_logical_links(graph: AuxGraph, inter_tech_links: Iterable[InterTechLink]) -> List[AuxEdge]:
    """Discover logical links by tracing server-layer physical links.

    Starting at the server port of each inter-technology link, the trace
    follows physical links of the server tech/layer from element to element.
    It succeeds when it reaches an element whose server port is patched to
    another inter-technology link with the same client tech/layer; a
    LOGICAL edge then joins the two client-side nodes. Traces that dead-end
    or branch emit nothing. Each pair is emitted once.

    Raises:
        BuildError: if a trace revisits an element (cyclic server path).
    """
    itls = sorted(inter_tech_links, key=lambda x: x.id)
    by_server: Dict[Tuple[str, TechLayer], List[InterTechLink]] = {}
    for itl in itls:
        for ne, tl in ((itl.client_ne, itl.client_tl), (itl.server_ne, itl.server_tl)):
            if not graph.has_node(node_id(ne, tl)):
                raise BuildError(f"inter-technology link {itl.id}: {ne} has no {tl} port")
        by_server.setdefault((itl.server_ne, itl.server_tl), []).append(itl)

    created: List[AuxEdge] = []
    seen_pairs = set()
    for itl in itls:
        tl = itl.server_tl
        cur = node_id(itl.server_ne, tl)
        visited = {itl.server_ne}
        path: List[str] = []
        prev_edge: Optional[str] = None
        while True:
            nxt = [
                e
                for e in graph.incident(cur)
                if e.kind is EdgeKind.PHYSICAL and e.id != prev_edge
            ]
            if len(nxt) != 1:
                break
            edge = nxt[0]
            far = edge.other(cur)
            far_ne = graph.node(far).ne_id
            if far_ne in visited:
                raise BuildError(f"inter-technology link {itl.id}: cyclic trace through {far_ne}")
            visited.add(far_ne)
            path.append(edge.id)
            prev_edge = edge.id
            cur = far
            ends = [
                o
                for o in by_server.get((far_ne, tl), [])
                if o.id != itl.id and o.client_tl == itl.client_tl
            ]
            if ends:
                other = ends[0]
                pair = tuple(sorted((itl.id, other.id)))
                if pair not in seen_pairs:
                    seen_pairs.add(pair)
                    a, b = (itl, other) if itl.id < other.id else (other, itl)
                    under = tuple(path) if a is itl else tuple(reversed(path))
                    edge_objs = [graph.edge(x) for x in under]
                    new = AuxEdge(
                        f"LT:{a.id}:{b.id}",
                        node_id(a.client_ne, a.client_tl),
                        node_id(b.client_ne, b.client_tl),
                        EdgeKind.LOGICAL,
                        distance_km=sum(x.distance_km for x in edge_objs) + a.distance_km + b.distance_km,
                        pool=CapacityPool.for_rate(_logical_rate(a.client_tl)),
                        srlg_ids=frozenset().union(*(x.srlg_ids for x in edge_objs)),
                        underlying_path=under,
                        tech_layer=a.client_tl,
                    )
                    created.append(graph.add_edge(new))
                break
    return created


def _logical_rate(tl: TechLayer):
    from .model import LOGICAL_CONTAINER

    try:
        return LOGICAL_CONTAINER[tl]
    except KeyError as exc:
        raise BuildError(f"no logical container defined for {tl}") from exc


def add_topology_edges(graph: AuxGraph, topology: Topology, links: Mapping[str, Link]) -> List[AuxEdge]:
    """Add the special edges (and hub) that represent ``topology``.

    Core rings get a full mesh of self-protected ring special edges, rings
    with an aggregate get one edge from every other member to the
    aggregate, dual homing gets a hub joined to each member and to both
    aggregates. Mesh and 1+1 topologies add nothing.

    Raises:
        BuildError: if the topology is malformed.
    """
    try:
        validate_topology(topology, links)
    except ValidationError as exc:
        raise BuildError(str(exc)) from exc
    tid = topology.id
    graph.topologies[tid] = topology
    if not topology.member_links:
        return []
    tl = links[topology.member_links[0]].tech_layer
    graph.topology_tech_layer[tid] = tl
    graph.topology_links[tid] = list(topology.member_links)
    member_edges = [graph.edge(lid) for lid in topology.member_links]
    for edge in member_edges:
        edge.topology_id = tid
    srlgs = frozenset().union(*(e.srlg_ids for e in member_edges))
    kind = topology.kind
    created: List[AuxEdge] = []

    if kind in (TopologyKind.CORE_RING, TopologyKind.RING_WITH_AGG):
        order = ring_order(topology, links)
        graph.topology_nodes[tid] = [node_id(ne, tl) for ne in order]
        if kind is TopologyKind.CORE_RING:
            pairs = list(itertools.combinations(sorted(order), 2))
        else:
            agg = topology.aggregate_nodes[0]
            pairs = [(ne, agg) for ne in sorted(order) if ne != agg]
        for a, b in pairs:
            created.append(
                graph.add_edge(
                    AuxEdge(
                        f"S:{tid}:{a}-{b}",
                        node_id(a, tl),
                        node_id(b, tl),
                        EdgeKind.RING_SPECIAL,
                        pool=bottleneck_pool(e.pool for e in member_edges),
                        self_protected=True,
                        topology_id=tid,
                        srlg_ids=srlgs,
                        underlying_path=tuple(topology.member_links),
                        tech_layer=tl,
                    )
                )
            )
        _set_special_distances(graph, tid, created)
    elif kind is TopologyKind.DUAL_HOMING:
        order = chain_order(topology, links)
        graph.topology_nodes[tid] = [node_id(ne, tl) for ne in order]
        hub = graph.add_node(AuxNode(hub_id(tid), NodeKind.HUB, topology_id=tid))
        for ne in sorted(order[1:-1]):
            created.append(
                graph.add_edge(
                    AuxEdge(
                        f"D:{tid}:{ne}",
                        node_id(ne, tl),
                        hub.id,
                        EdgeKind.DH_SPECIAL,
                        pool=bottleneck_pool(e.pool for e in member_edges),
                        self_protected=True,
                        topology_id=tid,
                        srlg_ids=srlgs,
                        underlying_path=tuple(topology.member_links),
                        tech_layer=tl,
                    )
                )
            )
        for agg in topology.aggregate_nodes:
            created.append(
                graph.add_edge(
                    AuxEdge(
                        f"H:{tid}:{agg}",
                        hub.id,
                        node_id(agg, tl),
                        EdgeKind.DH_HUB_LEG,
                        pool=bottleneck_pool(e.pool for e in member_edges),
                        self_protected=True,
                        topology_id=tid,
                        srlg_ids=srlgs,
                        tech_layer=tl,
                    )
                )
            )
        _set_special_distances(graph, tid, created)
    return created


def ring_arcs(graph: AuxGraph, tid: str, a: str, b: str) -> Tuple[List[str], List[str]]:
    """Both arcs of a ring between nodes ``a`` and ``b``.

    Returns the member edge ids walked from ``a`` forward around the ring
    to ``b`` and the complementary arc walked backward, each in travel order.
    """
    order = graph.topology_nodes[tid]
    links = graph.topology_links[tid]
    n = len(order)
    i, j = order.index(a), order.index(b)
    if i == j:
        raise BuildError(f"topology {tid}: arc endpoints coincide")
    fwd = [links[(i + k) % n] for k in range((j - i) % n)]
    bwd = [links[(i - 1 - k) % n] for k in range((i - j) % n)]
    return fwd, bwd


def chain_path(graph: AuxGraph, tid: str, a: str, b: str) -> List[str]:
    """Member edge ids along a dual-homing chain from ``a`` to ``b``."""
    order = graph.topology_nodes[tid]
    links = graph.topology_links[tid]
    i, j = order.index(a), order.index(b)
    if i <= j:
        return links[i:j]
    return list(reversed(links[j:i]))


def _set_special_distances(graph: AuxGraph, tid: str, created: Sequence[AuxEdge]) -> None:
    # Physical length of the shorter way across the topology.
    def length(ids: Sequence[str]) -> float:
        return sum(graph.edge(x).distance_km for x in ids)

    order = graph.topology_nodes[tid]
    for edge in created:
        if edge.kind is EdgeKind.DH_HUB_LEG:
            continue
        if edge.kind is EdgeKind.RING_SPECIAL:
            d = min(length(arc) for arc in ring_arcs(graph, tid, edge.u, edge.v))
        else:
            d = min(length(chain_path(graph, tid, edge.u, order[0])), length(chain_path(graph, tid, edge.u, order[-1])))
        edge.distance_km = d
        graph._cols.dist[graph.edge_index(edge.id)] = d
