"""Request provisioning: capacity filter, path search, logical links, charging.

A request is served in four steps. Edges that cannot carry the request
are masked out. The path search runs (unprotected or protected pair).
Logical links are created wherever the path adapts down into a
non-service layer and back. Finally capacity is charged on every edge the
service rides on, including both arcs behind each special edge crossed.

Every pool change goes through an undo log, so a request that fails at
any point leaves the graph exactly as it found it.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .graph import LOGICAL_ID_PREFIX, AuxEdge, AuxGraph, EdgeKind, node_id
from .model import (
    CONTAINER_RATES,
    LOGICAL_CONTAINER,
    SERVICE_LAYER_OF_RATE,
    CapacityError,
    CapacityPool,
    RateKind,
    ValidationError,
    consume,
    demand_mbps,
    restore,
)
from .paths import (
    DEFAULT_MAX_DEPTH,
    Path,
    ProtectedPath,
    SearchView,
    find_lpp,
    find_unprotected_path,
    replay_stacks,
    special_crossings,
)
from .weights import WeightParams, assign_initial_weights, dynamic_weights, initial_logical_weight

logger = logging.getLogger(__name__)


class PathType(str, enum.Enum):
    UNPROTECTED = "UNPROTECTED"
    LPP = "LPP"


@dataclass(frozen=True)
class ServiceRequest:
    """One service request.

    Attributes:
        id: Request identifier.
        src_ne: Source element.
        dst_ne: Destination element.
        path_type: Unprotected or protected pair.
        N: Number of candidate paths to compute.
        layer_rate: Requested rate.
        capacity_mbps: Bandwidth for ``ETH_BW``; implied by the rate otherwise.
    """

    id: str
    src_ne: str
    dst_ne: str
    path_type: PathType = PathType.LPP
    N: int = 1
    layer_rate: RateKind = RateKind.VC12
    capacity_mbps: Fraction = Fraction(0)

    def __post_init__(self) -> None:
        object.__setattr__(self, "path_type", PathType(self.path_type))
        object.__setattr__(self, "layer_rate", RateKind(self.layer_rate))
        cap = Fraction(self.capacity_mbps)
        if self.layer_rate is not RateKind.ETH_BW:
            cap = demand_mbps(self.layer_rate)
        elif cap <= 0:
            raise ValidationError("ETH_BW requests need a positive capacity")
        object.__setattr__(self, "capacity_mbps", cap)
        if self.N < 1:
            raise ValidationError("N must be at least 1")
        if self.src_ne == self.dst_ne:
            raise ValidationError("source and destination must differ")

    @property
    def demand(self) -> Fraction:
        return demand_mbps(self.layer_rate, self.capacity_mbps)


@dataclass
class ProvisioningResult:
    """Outcome of one request.

    Attributes:
        request_id: The request served.
        accepted: Whether capacity was provisioned.
        paths: Paths found (also filled when ``N > 1`` and nothing was provisioned).
        created_logical_links: Ids of logical links created for the request.
        provisioned_mbps_total: Mbps charged across all pools for the request,
            logical-link reservations included.
        service_mbps: Mbps charged for the service itself on physical and
            logical links, without logical-link reservations.
        charges: ``(edge id, Mbps)`` per pool change, in order.
        reason: Why the request was not provisioned, if it was not.
    """

    request_id: str
    accepted: bool
    paths: List[Union[Path, ProtectedPath]] = field(default_factory=list)
    created_logical_links: List[str] = field(default_factory=list)
    provisioned_mbps_total: Fraction = Fraction(0)
    service_mbps: Fraction = Fraction(0)
    charges: List[Tuple[str, Fraction]] = field(default_factory=list)
    reason: str = ""


class _Undo:
    """Undo log of pool changes and created edges."""

    def __init__(self, graph: AuxGraph, ledger: Dict[str, Fraction]) -> None:
        self.graph = graph
        self.ledger = ledger
        self.pool_ops: List[Tuple[str, RateKind, Fraction]] = []
        self.created: List[str] = []
        self.counter = graph.logical_counter
        self.charges: List[Tuple[str, Fraction]] = []

    def consume(self, eid: str, rate: RateKind, mbps: Fraction) -> None:
        edge = self.graph.edge(eid)
        self.graph.set_pool(eid, consume(edge.pool, rate, mbps))
        self.pool_ops.append((eid, rate, mbps))
        self.ledger[eid] = self.ledger.get(eid, Fraction(0)) + mbps
        self.charges.append((eid, mbps))

    def rollback(self) -> None:
        for eid, rate, mbps in reversed(self.pool_ops):
            if self.graph.has_edge(eid):
                self.graph.set_pool(eid, restore(self.graph.edge(eid).pool, rate, mbps))
            left = self.ledger[eid] - mbps
            if left:
                self.ledger[eid] = left
            else:
                del self.ledger[eid]
        for eid in reversed(self.created):
            self.graph.pop_edge(eid)
        self.graph.logical_counter = self.counter
        self.pool_ops.clear()
        self.created.clear()
        self.charges.clear()


def _charge_positions(
    graph: AuxGraph,
    undo: _Undo,
    edge_ids: Sequence[str],
    positions: Sequence[int],
    crossings: Sequence[Tuple[Tuple[int, ...], List[str], List[str]]],
    rate: RateKind,
    mbps: Fraction,
) -> None:
    """Charge ``rate`` on the listed path positions and on the member arcs behind them."""
    posset = set(positions)
    for i in positions:
        if graph.edge(edge_ids[i]).pool is not None:
            undo.consume(edge_ids[i], rate, mbps)
    for pos, working, protection in crossings:
        if pos[0] in posset:
            for member in dict.fromkeys(working + protection):
                undo.consume(member, rate, mbps)


def _create_logical_links(
    graph: AuxGraph,
    path: Path,
    undo: _Undo,
    params: Optional[WeightParams],
    max_depth: int,
    crossings,
) -> Tuple[List[str], List[Tuple[int, int, str]]]:
    """Create the logical links implied by ``path``; returns ids and ``(start, end, id)`` spans."""
    edges = path.edges
    nodes = path.nodes
    stacks = replay_stacks(graph, nodes[0], edges, path.start_stack, max_depth)
    if stacks is None:
        raise ValidationError("path is not adaptation-compatible")
    pushes: List[Optional[int]] = [None] * len(path.start_stack)
    created: List[str] = []
    spans: List[Tuple[int, int, str]] = []
    for j, eid in enumerate(edges):
        before, after = stacks[j], stacks[j + 1]
        if len(after) == len(before) + 1:
            pushes.append(j)
            continue
        if len(after) != len(before) - 1:
            continue
        i = pushes.pop()
        tl = before[-1]
        if i is None or tl.is_service:
            continue
        inner = [s for s in spans if i < s[0] and s[1] < j]
        starts = {s[0]: s for s in inner}
        members: List[str] = []
        nested: List[str] = []
        direct: List[int] = []
        k = i + 1
        while k < j:
            span = starts.get(k)
            if span is not None:
                # Outermost inner span starting here; its link replaces it.
                members.append(span[2])
                nested.append(span[2])
                k = span[1] + 1
                continue
            if graph.edge(edges[k]).kind is not EdgeKind.ADAPTATION:
                members.append(edges[k])
                direct.append(k)
            k += 1
        if not members:
            continue
        rate = LOGICAL_CONTAINER[tl]
        mbps = CapacityPool.for_rate(rate).max_mbps
        for m in nested:
            undo.consume(m, rate, mbps)
        _charge_positions(graph, undo, edges, direct, crossings, rate, mbps)
        under = [graph.edge(m) for m in members]
        graph.logical_counter += 1
        new_id = f"{LOGICAL_ID_PREFIX}{graph.logical_counter:07d}"
        weight = initial_logical_weight([e.weight_initial for e in under], params) if params else 0.0
        edge = AuxEdge(
            new_id,
            nodes[i],
            nodes[j + 1],
            EdgeKind.LOGICAL,
            distance_km=sum(e.distance_km for e in under),
            pool=CapacityPool.for_rate(rate),
            srlg_ids=frozenset().union(*(e.srlg_ids for e in under)),
            underlying_path=tuple(members),
            weight_initial=weight,
            tech_layer=tl,
        )
        graph.add_edge(edge)
        undo.created.append(new_id)
        created.append(new_id)
        spans.append((i, j, new_id))
    return created, spans


def check_and_create_logical_links(
    graph: AuxGraph,
    path: Path,
    params: Optional[WeightParams] = None,
    max_depth: int = DEFAULT_MAX_DEPTH,
) -> List[str]:
    """Create a logical link for every non-service adapt-down/adapt-up pair on ``path``.

    Each link joins the client-layer nodes where the pair starts and ends,
    rides on the server-layer edges between them (inner pairs replaced by
    the links already created for them) and reserves its full container on
    each of those edges.

    Raises:
        CapacityError: if an underlying edge cannot carry the container; the
            graph is rolled back first.
    """
    undo = _Undo(graph, {})
    crossings = special_crossings(graph, path.nodes, path.edges)
    try:
        created, _ = _create_logical_links(graph, path, undo, params, max_depth, crossings)
    except Exception:
        undo.rollback()
        raise
    return created


def _outside(spans: Sequence[Tuple[int, int, str]], k: int) -> bool:
    return not any(a <= k <= b for a, b, _ in spans)


def _outermost(spans: Sequence[Tuple[int, int, str]]) -> List[str]:
    return [sid for a, b, sid in spans if not any(x < a and b < y for x, y, _ in spans)]


# Edge kinds whose pools stand for real bearer capacity; special-edge pools
# only mirror the member links that are charged alongside them.
BEARER_KINDS = frozenset({EdgeKind.PHYSICAL, EdgeKind.LOGICAL})


class Provisioner:
    """Serves requests against one graph, strictly one at a time.

    Args:
        graph: Graph to provision on; mutated in place.
        params: Weight parameters. Initial weights are (re)assigned from them.
        max_depth: Adaptation stack depth limit.
        assign_weights: Recompute initial weights from ``params`` on start.
    """

    def __init__(
        self,
        graph: AuxGraph,
        params: Optional[WeightParams] = None,
        max_depth: int = DEFAULT_MAX_DEPTH,
        assign_weights: bool = True,
    ) -> None:
        self.graph = graph
        params = params or WeightParams()
        self.params = assign_initial_weights(graph, params) if assign_weights else params
        self.max_depth = max_depth
        self.ledger: Dict[str, Fraction] = {}
        self._topo_index: Optional[Tuple[np.ndarray, np.ndarray, List[np.ndarray]]] = None

    # -- views ----------------------------------------------------------------

    def _topology_groups(self):
        if self._topo_index is None:
            g = self.graph
            members, specials = [], []
            for tid, topo in sorted(g.topologies.items()):
                if not topo.represented or tid not in g.topology_links:
                    continue
                m = np.array([g.edge_index(x) for x in g.topology_links[tid]], dtype=np.int64)
                s = np.array(
                    [i for i, e in enumerate(g.edges) if e.topology_id == tid and e.kind in (EdgeKind.RING_SPECIAL, EdgeKind.DH_SPECIAL, EdgeKind.DH_HUB_LEG)],
                    dtype=np.int64,
                )
                members.append(m)
                specials.append(s)
            self._topo_index = (members, specials)
        return self._topo_index

    def capacity_mask(self, rate: RateKind, capacity_mbps: Fraction) -> np.ndarray:
        """Edges able to carry the request; special edges also need their members."""
        g = self.graph
        need = float(demand_mbps(rate, capacity_mbps))
        has_pool = g.column("has_pool")
        ok = ~has_pool | (g.column("avail") >= need - 1e-9)
        if rate in CONTAINER_RATES:
            cont = g.containers_column(rate)
            ok &= ~has_pool | (cont != 0)
        members, specials = self._topology_groups()
        for m, s in zip(members, specials):
            if s.size and not ok[m].all():
                ok[s] = False
        return ok

    def weight_view(self) -> np.ndarray:
        """Current dynamic weights of every edge."""
        g = self.graph
        w = dynamic_weights(g.column("w_init"), g.utilization(), g.column("dist"), self.params)
        w[g.column("adapt")] = self.params.epsilon
        return w

    # -- requests -------------------------------------------------------------

    def service_node(self, ne: str, rate: RateKind) -> str:
        tl = SERVICE_LAYER_OF_RATE.get(RateKind(rate))
        if tl is None:
            raise ValidationError(f"no service layer for rate {rate}")
        nid = node_id(ne, tl)
        if not self.graph.has_node(nid):
            raise ValidationError(f"{ne} has no {tl} service port")
        return nid

    def serve(self, request: ServiceRequest) -> ProvisioningResult:
        return self.find_path(
            request.src_ne,
            request.dst_ne,
            request.path_type,
            request.N,
            request.layer_rate,
            request.capacity_mbps,
            request_id=request.id,
        )

    def search(
        self,
        src_ne: str,
        dst_ne: str,
        path_type: PathType,
        N: int,
        rate: RateKind,
        capacity_mbps: Fraction,
    ) -> List[Union[Path, ProtectedPath]]:
        """Path search only: capacity filter plus dispatch, no provisioning."""
        rate = RateKind(rate)
        src = self.service_node(src_ne, rate)
        dst = self.service_node(dst_ne, rate)
        mask = self.capacity_mask(rate, Fraction(capacity_mbps))
        view = SearchView(self.graph, self.weight_view(), mask, self.max_depth)
        if PathType(path_type) is PathType.UNPROTECTED:
            return list(find_unprotected_path(self.graph, src, dst, N, view=view))
        return list(find_lpp(self.graph, src, dst, N, view=view))

    def find_path(
        self,
        src_ne: str,
        dst_ne: str,
        path_type: PathType = PathType.LPP,
        N: int = 1,
        layer_rate: RateKind = RateKind.VC12,
        capacity_mbps: Fraction | int = 0,
        request_id: str = "",
    ) -> ProvisioningResult:
        """Find paths for a request and, when ``N == 1``, provision the best.

        A request with no feasible path is rejected (``accepted=False``), as is
        one whose logical-link containers do not fit; in both cases the graph
        is left untouched.
        """
        rate = RateKind(layer_rate)
        cap = demand_mbps(rate, capacity_mbps if rate is RateKind.ETH_BW else None)
        found = self.search(src_ne, dst_ne, PathType(path_type), N, rate, cap)
        if not found:
            return ProvisioningResult(request_id, False, reason="no path")
        if N > 1:
            return ProvisioningResult(request_id, False, paths=found, reason="selection required")
        return self.provision(found[0], rate, cap, request_id)

    def provision(
        self,
        chosen: Union[Path, ProtectedPath],
        layer_rate: RateKind,
        capacity_mbps: Fraction | int = 0,
        request_id: str = "",
    ) -> ProvisioningResult:
        """Create logical links for and charge capacity on an already selected path.

        The path must come from :meth:`search` on the current graph state.
        """
        rate = RateKind(layer_rate)
        cap = demand_mbps(rate, capacity_mbps if rate is RateKind.ETH_BW else None)
        undo = _Undo(self.graph, self.ledger)
        try:
            service = self._provision(chosen, rate, cap, undo)
        except CapacityError as exc:
            undo.rollback()
            logger.debug("request %s rolled back: %s", request_id, exc)
            return ProvisioningResult(request_id, False, paths=[chosen], reason=f"capacity: {exc}")
        except Exception:
            undo.rollback()
            raise
        total = sum((m for _, m in undo.charges), Fraction(0))
        return ProvisioningResult(
            request_id,
            True,
            paths=[chosen],
            created_logical_links=list(undo.created),
            provisioned_mbps_total=total,
            service_mbps=service,
            charges=list(undo.charges),
        )

    def _provision(self, chosen: Union[Path, ProtectedPath], rate: RateKind, cap: Fraction, undo: _Undo) -> Fraction:
        parts = [chosen] if isinstance(chosen, Path) else [chosen.working] + [p for _, p in chosen.protection]
        before = len(undo.charges)
        service = Fraction(0)
        for path in parts:
            crossings = special_crossings(self.graph, path.nodes, path.edges)
            _, spans = _create_logical_links(self.graph, path, undo, self.params, self.max_depth, crossings)
            top = [
                k
                for k, eid in enumerate(path.edges)
                if _outside(spans, k) and self.graph.edge(eid).kind is not EdgeKind.ADAPTATION
            ]
            mark = len(undo.charges)
            for lid in _outermost(spans):
                undo.consume(lid, rate, cap)
            _charge_positions(self.graph, undo, path.edges, top, crossings, rate, cap)
            service += sum(
                (m for eid, m in undo.charges[mark:] if self.graph.edge(eid).kind in BEARER_KINDS),
                Fraction(0),
            )
        if len(undo.charges) == before:
            # Purely intra-element path: nothing to charge.
            logger.debug("request provisioned without capacity-bearing edges")
        return service

    # -- bookkeeping ----------------------------------------------------------

    def check_conservation(self) -> None:
        """Every pool's used capacity equals the ledger of charges against it.

        Raises:
            AssertionError: on the first mismatch.
        """
        for edge in self.graph.edges:
            if edge.pool is None:
                continue
            used = edge.pool.max_mbps - edge.pool.available_mbps
            if used != self.ledger.get(edge.id, Fraction(0)):
                raise AssertionError(f"ledger mismatch on {edge.id}: used {used}, charged {self.ledger.get(edge.id)}")
            if edge.pool.available_mbps < 0 or any(n < 0 for _, n in edge.pool.containers):
                raise AssertionError(f"negative capacity on {edge.id}")
