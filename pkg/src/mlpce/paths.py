"""Adaptation-aware path search over the auxiliary graph.

A path is only valid if every adaptation edge on it is compatible with the
stack of tech/layers pushed so far: going from client to server pushes,
coming back from server to client must pop the matching entry. A complete
end-to-end path leaves the stack empty.

Searches never mutate the graph. Edge "removal" is expressed through a
boolean edge mask, so the graph is untouched whatever the outcome.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from . import _kernels
from .graph import AuxEdge, AuxGraph, AuxNode, EdgeKind, chain_path, ring_arcs
from .model import TL_CODES, TechLayer, TopologyKind

DEFAULT_MAX_DEPTH = 8

_TL_BY_CODE = {code: tl for tl, code in TL_CODES.items()}

Stack = Tuple[TechLayer, ...]


class ExpansionError(ValueError):
    """Raised when a special edge cannot be expanded into member arcs."""


@dataclass(frozen=True)
class Path:
    """A path through the auxiliary graph.

    Attributes:
        edges: Edge ids in travel order.
        total_cost: Sum of edge weights, accumulated from the first edge.
        end_stack: Adaptation stack after the last edge (bottom first).
        nodes: Node ids visited, one more than ``edges``.
        start_stack: Stack the path was searched from.
    """

    edges: Tuple[str, ...]
    total_cost: float
    end_stack: Stack = ()
    nodes: Tuple[str, ...] = ()
    start_stack: Stack = ()

    def __len__(self) -> int:
        return len(self.edges)


@dataclass(frozen=True)
class ProtectedPath:
    """A working path plus dedicated protection for its exposed segments.

    ``protection`` holds ``((start, end), path)`` per non-self-protected
    segment, where ``start:end`` slices ``working.edges``.
    """

    working: Path
    protection: Tuple[Tuple[Tuple[int, int], Path], ...]
    combined_cost: float


# ---------------------------------------------------------------------------
# Adaptation stack
# ---------------------------------------------------------------------------


def explore_edge(
    edge: AuxEdge,
    current_node: AuxNode,
    adjacent_node: AuxNode,
    stack: Sequence[TechLayer],
    max_depth: int = DEFAULT_MAX_DEPTH,
) -> Tuple[bool, Stack]:
    """Decide whether ``edge`` may be crossed from ``current_node``.

    Non-adaptation edges never touch the stack. On an adaptation edge an
    empty stack records the current tech/layer; otherwise moving from the
    client end pushes the current tech/layer, and moving from the server
    end must pop an entry equal to the adjacent tech/layer.

    Returns:
        ``(allowed, new_stack)``; ``new_stack`` is the input when disallowed.
    """
    stack = tuple(stack)
    if edge.kind is not EdgeKind.ADAPTATION:
        return True, stack
    if not stack:
        return True, (current_node.tech_layer,)
    if current_node.id == edge.u:
        if len(stack) >= max_depth:
            return False, stack
        return True, stack + (current_node.tech_layer,)
    if stack[-1] == adjacent_node.tech_layer:
        return True, stack[:-1]
    return False, stack


def encode_stack(stack: Sequence[TechLayer]) -> int:
    return _kernels.pack_stack(TL_CODES[tl] for tl in stack)


def decode_stack(value: int) -> Stack:
    return tuple(_TL_BY_CODE[c] for c in _kernels.unpack_stack(value))


def replay_stacks(
    graph: AuxGraph,
    src: str,
    edge_ids: Sequence[str],
    start: Sequence[TechLayer] = (),
    max_depth: int = DEFAULT_MAX_DEPTH,
) -> Optional[List[Stack]]:
    """Stacks before each edge and after the last one, or None if blocked."""
    stack: Stack = tuple(start)
    out = [stack]
    cur = graph.node(src)
    for eid in edge_ids:
        edge = graph.edge(eid)
        nxt = graph.node(edge.other(cur.id))
        ok, stack = explore_edge(edge, cur, nxt, stack, max_depth)
        if not ok:
            return None
        out.append(stack)
        cur = nxt
    return out


# ---------------------------------------------------------------------------
# Search plumbing
# ---------------------------------------------------------------------------


class SearchView:
    """Arrays for one or more queries against a fixed graph state.

    Args:
        graph: The graph to search.
        weights: Per-edge weights; defaults to the initial weights.
        mask: Per-edge availability; defaults to all edges.
        max_depth: Adaptation stack depth limit.
    """

    def __init__(
        self,
        graph: AuxGraph,
        weights: Optional[np.ndarray] = None,
        mask: Optional[np.ndarray] = None,
        max_depth: int = DEFAULT_MAX_DEPTH,
    ) -> None:
        if not 1 <= max_depth <= _kernels.MAX_STACK_DEPTH:
            raise ValueError(f"max_depth must lie in [1, {_kernels.MAX_STACK_DEPTH}]")
        self.graph = graph
        m = graph.n_edges
        self.weights = np.ascontiguousarray(graph.column("w_init") if weights is None else weights, dtype=np.float64)
        if self.weights.shape[0] != m:
            raise ValueError("weight view does not cover every edge")
        if m and (not np.all(np.isfinite(self.weights)) or self.weights.min() < 0):
            bad = ~np.isfinite(self.weights) | (self.weights < 0)
            if mask is None or np.any(bad & mask):
                raise ValueError("weight view must be finite and non-negative on present edges")
        self.mask = np.ones(m, dtype=np.bool_) if mask is None else np.asarray(mask, dtype=np.bool_)
        self.max_depth = max_depth
        self.csr = graph.csr()
        self.client = graph.column("client")
        self.adapt = graph.column("adapt")
        self.codes = graph.node_codes
        self.ranks = graph.edge_ranks()
        self.node_ok = np.ones(graph.n_nodes, dtype=np.bool_)

    def with_mask(self, mask: np.ndarray) -> "SearchView":
        view = object.__new__(SearchView)
        view.__dict__.update(self.__dict__)
        view.mask = mask
        return view

    def run(
        self,
        src: int,
        dst: int,
        init_stack: int = 0,
        target_stack: int = 0,
        init_cost: float = 0.0,
        init_hops: int = 0,
        mask: Optional[np.ndarray] = None,
        node_ok: Optional[np.ndarray] = None,
    ) -> Optional[Tuple[List[int], float]]:
        csr = self.csr
        found, cost, hops, pred_edge, pred_node = _kernels.label_dijkstra(
            csr.indptr,
            csr.adj_edge,
            csr.adj_node,
            self.client,
            self.adapt,
            self.weights,
            self.mask if mask is None else mask,
            self.node_ok if node_ok is None else node_ok,
            self.codes,
            self.ranks,
            src,
            dst,
            init_stack,
            target_stack,
            float(init_cost),
            init_hops,
            self.max_depth,
        )
        if not found:
            return None
        out = []
        node = dst
        while node != src:
            out.append(int(pred_edge[node]))
            node = int(pred_node[node])
        out.reverse()
        return out, float(cost)

    def key(self, edge_idx: Sequence[int], cost: float) -> tuple:
        return (cost, len(edge_idx), tuple(int(self.ranks[i]) for i in edge_idx))


def _make_path(view: SearchView, src: str, edge_idx: Sequence[int], cost: float, start: Stack) -> Path:
    graph = view.graph
    edges = tuple(graph.edges[i].id for i in edge_idx)
    nodes = [src]
    for i in edge_idx:
        nodes.append(graph.edges[i].other(nodes[-1]))
    stacks = replay_stacks(graph, src, edges, start, view.max_depth)
    end = stacks[-1] if stacks else ()
    return Path(edges, cost, end, tuple(nodes), tuple(start))


def _check_endpoints(graph: AuxGraph, src: str, dst: str) -> None:
    if src == dst:
        raise ValueError("source and destination must differ")
    for n in (src, dst):
        if not graph.has_node(n):
            raise KeyError(f"unknown node {n}")


def dijkstra_shortest_path(
    graph: AuxGraph,
    src: str,
    dst: str,
    weights: Optional[np.ndarray] = None,
    mask: Optional[np.ndarray] = None,
    *,
    init_stack: Sequence[TechLayer] = (),
    target_stack: Sequence[TechLayer] = (),
    max_depth: int = DEFAULT_MAX_DEPTH,
    view: Optional[SearchView] = None,
) -> Optional[Path]:
    """Cheapest adaptation-compatible path from ``src`` to ``dst``.

    Each node keeps one (cost, stack) label; ties are broken by hop count
    and then by the lexicographic edge-id sequence. The path must arrive at
    ``dst`` with ``target_stack`` (empty by default).
    """
    _check_endpoints(graph, src, dst)
    view = view or SearchView(graph, weights, mask, max_depth)
    res = view.run(
        graph.node_index(src),
        graph.node_index(dst),
        encode_stack(init_stack),
        encode_stack(target_stack),
    )
    if res is None:
        return None
    return _make_path(view, src, res[0], res[1], tuple(init_stack))


def yen_k_shortest(
    graph: AuxGraph,
    src: str,
    dst: str,
    K: int,
    weights: Optional[np.ndarray] = None,
    mask: Optional[np.ndarray] = None,
    *,
    init_stack: Sequence[TechLayer] = (),
    target_stack: Sequence[TechLayer] = (),
    max_depth: int = DEFAULT_MAX_DEPTH,
    view: Optional[SearchView] = None,
) -> List[Path]:
    """Up to ``K`` loopless adaptation-compatible paths in ascending order."""
    if K < 1:
        raise ValueError("K must be at least 1")
    _check_endpoints(graph, src, dst)
    view = view or SearchView(graph, weights, mask, max_depth)
    s = graph.node_index(src)
    t = graph.node_index(dst)
    start = encode_stack(init_stack)
    target = encode_stack(target_stack)
    first = view.run(s, t, start, target)
    if first is None:
        return []

    # Accepted paths as (edge indices, node indices, stacks, prefix costs, cost).
    cu = graph.column("u")
    cv = graph.column("v")
    limit = _kernels.NIBBLE ** (view.max_depth - 1)

    def expand(edge_idx: List[int], cost: float):
        nodes = [s]
        stacks = [start]
        prefix = [0.0]
        st = start
        for e in edge_idx:
            u = nodes[-1]
            v = int(cu[e]) if int(cv[e]) == u else int(cv[e])
            st = _kernels.step_stack(bool(view.adapt[e]), int(view.client[e]) == u, int(view.codes[u]), int(view.codes[v]), st, limit)
            nodes.append(v)
            stacks.append(st)
            prefix.append(prefix[-1] + float(view.weights[e]))
        return edge_idx, nodes, stacks, prefix, cost

    accepted = [expand(*first)]
    seen = {tuple(first[0])}
    candidates: list = []
    while len(accepted) < K:
        edge_idx, nodes, stacks, prefix, _ = accepted[-1]
        for i in range(len(edge_idx)):
            root = edge_idx[:i]
            mask_i = view.mask.copy()
            for other in accepted:
                if other[0][:i] == root and len(other[0]) > i:
                    mask_i[other[0][i]] = False
            node_ok = view.node_ok.copy()
            node_ok[nodes[:i]] = False
            res = view.run(nodes[i], t, stacks[i], target, prefix[i], i, mask=mask_i, node_ok=node_ok)
            if res is None:
                continue
            full = list(root) + res[0]
            key_t = tuple(full)
            if key_t in seen:
                continue
            seen.add(key_t)
            heapq.heappush(candidates, (view.key(full, res[1]), full, res[1]))
        if not candidates:
            break
        _, full, cost = heapq.heappop(candidates)
        accepted.append(expand(full, cost))
    return [_make_path(view, src, a[0], a[4], tuple(init_stack)) for a in accepted]


def self_protected_free(graph: AuxGraph, mask: Optional[np.ndarray] = None) -> np.ndarray:
    """``mask`` with every self-protected edge removed."""
    base = np.ones(graph.n_edges, dtype=np.bool_) if mask is None else np.asarray(mask, dtype=np.bool_)
    return base & ~graph.column("self_prot")


def find_unprotected_path(
    graph: AuxGraph,
    src: str,
    dst: str,
    N: int = 1,
    weights: Optional[np.ndarray] = None,
    mask: Optional[np.ndarray] = None,
    *,
    init_stack: Sequence[TechLayer] = (),
    target_stack: Sequence[TechLayer] = (),
    max_depth: int = DEFAULT_MAX_DEPTH,
    view: Optional[SearchView] = None,
) -> List[Path]:
    """Unprotected paths that do not consume any self-protected edge.

    Self-protected edges are left out so their protection capacity is not
    spent on traffic that does not need it. ``N == 1`` runs one shortest
    path search, larger ``N`` runs Yen's method.
    """
    if N < 1:
        raise ValueError("N must be at least 1")
    base = view.mask if view is not None and mask is None else mask
    stripped = self_protected_free(graph, base)
    view = view.with_mask(stripped) if view is not None else SearchView(graph, weights, stripped, max_depth)
    if N == 1:
        p = dijkstra_shortest_path(graph, src, dst, init_stack=init_stack, target_stack=target_stack, view=view)
        return [p] if p is not None else []
    return yen_k_shortest(graph, src, dst, N, init_stack=init_stack, target_stack=target_stack, view=view)


# ---------------------------------------------------------------------------
# Protected pairs
# ---------------------------------------------------------------------------


def topology_member_mask(graph: AuxGraph) -> np.ndarray:
    """True for edges that are member links of a ring or dual-homing topology."""
    out = np.zeros(graph.n_edges, dtype=np.bool_)
    for tid, topo in graph.topologies.items():
        if topo.represented:
            for eid in graph.topology_links.get(tid, ()):
                out[graph.edge_index(eid)] = True
    return out


def split_segments(graph: AuxGraph, edge_ids: Sequence[str]) -> List[Tuple[int, int, bool]]:
    """Maximal runs of self-protected and exposed edges.

    Adaptation edges do not decide a run; they join the run that follows
    them, or the last run when nothing follows.

    Returns:
        ``(start, end, self_protected)`` triples slicing ``edge_ids``.
    """
    segments: List[List] = []
    pending_start: Optional[int] = None
    for i, eid in enumerate(edge_ids):
        edge = graph.edge(eid)
        if edge.kind is EdgeKind.ADAPTATION:
            if pending_start is None:
                pending_start = i
            continue
        sp = edge.self_protected
        start = i if pending_start is None else pending_start
        pending_start = None
        if segments and segments[-1][2] == sp and segments[-1][1] == start:
            segments[-1][1] = i + 1
        else:
            segments.append([start, i + 1, sp])
    if pending_start is not None:
        if segments:
            segments[-1][1] = len(edge_ids)
        else:
            segments.append([0, len(edge_ids), False])
    return [(a, b, c) for a, b, c in segments]


def srlg_conflict_mask(graph: AuxGraph, edge_ids: Sequence[str]) -> np.ndarray:
    """True for the capacity-bearing edges of ``edge_ids`` and all edges sharing an SRLG with them."""
    out = np.zeros(graph.n_edges, dtype=np.bool_)
    for eid in edge_ids:
        edge = graph.edge(eid)
        if edge.kind is EdgeKind.ADAPTATION:
            continue
        out[graph.edge_index(eid)] = True
        for sid in edge.srlg_ids:
            for other in graph.srlgs.get(sid, ()):
                if graph.edge(other).kind is not EdgeKind.ADAPTATION:
                    out[graph.edge_index(other)] = True
    return out


def find_lpp(
    graph: AuxGraph,
    src: str,
    dst: str,
    N: int = 1,
    weights: Optional[np.ndarray] = None,
    mask: Optional[np.ndarray] = None,
    *,
    max_depth: int = DEFAULT_MAX_DEPTH,
    view: Optional[SearchView] = None,
) -> List[ProtectedPath]:
    """Link- and SRLG-disjoint working/protection pairs, cheapest first.

    Topology member links are hidden so rings and dual homing are crossed
    through their special edges. Each of the ``N`` candidate working paths
    is split into self-protected and exposed segments; every exposed segment
    gets its own protection path, searched without self-protected edges,
    without the working edges and without anything sharing an SRLG with
    them. The protection path starts from the working path's stack at the
    segment start and must reach the stack it has at the segment end.
    """
    if N < 1:
        raise ValueError("N must be at least 1")
    _check_endpoints(graph, src, dst)
    if view is None:
        view = SearchView(graph, weights, mask, max_depth)
    elif mask is not None:
        view = view.with_mask(np.asarray(mask, dtype=np.bool_))
    base = view.mask & ~topology_member_mask(graph)
    work_view = view.with_mask(base)
    candidates = yen_k_shortest(graph, src, dst, N, view=work_view)
    sp_free = ~graph.column("self_prot")
    results = []
    for order, working in enumerate(candidates):
        prot_mask = base & sp_free & ~srlg_conflict_mask(graph, working.edges)
        prot_view = view.with_mask(prot_mask)
        stacks = replay_stacks(graph, src, working.edges, working.start_stack, max_depth)
        protection = []
        ok = True
        for start, end, sp in split_segments(graph, working.edges):
            if sp:
                continue
            seg_src = working.nodes[start]
            seg_dst = working.nodes[end]
            if seg_src == seg_dst:
                continue
            p = dijkstra_shortest_path(
                graph,
                seg_src,
                seg_dst,
                init_stack=stacks[start],
                target_stack=stacks[end],
                view=prot_view,
            )
            if p is None:
                ok = False
                break
            protection.append(((start, end), p))
        if not ok:
            continue
        combined = working.total_cost + sum(p.total_cost for _, p in protection)
        results.append((combined, order, ProtectedPath(working, tuple(protection), combined)))
    results.sort(key=lambda r: (r[0], r[1]))
    return [r[2] for r in results]


# ---------------------------------------------------------------------------
# Special-edge expansion
# ---------------------------------------------------------------------------


def _arc_cost(graph: AuxGraph, ids: Sequence[str]) -> float:
    total = 0.0
    for x in ids:
        total += graph.edge(x).weight_initial
    return total


def topology_arcs(
    graph: AuxGraph, tid: str, a: str, b: Optional[str] = None
) -> Tuple[List[str], List[str]]:
    """Working and protection member arcs for a crossing from ``a`` to ``b``.

    On a ring the cheaper arc by initial weight is working (ties go to the
    lexicographically smaller edge-id sequence). On a dual-homing chain,
    ``b`` names the aggregate the traffic leaves by; when it is None the
    cheaper aggregate is chosen.
    """
    topo = graph.topologies.get(tid)
    if topo is None or tid not in graph.topology_nodes:
        raise ExpansionError(f"unknown or empty topology {tid}")
    order = graph.topology_nodes[tid]
    if topo.kind in (TopologyKind.CORE_RING, TopologyKind.RING_WITH_AGG):
        if b is None or a not in order or b not in order or a == b:
            raise ExpansionError(f"ring crossing {a}->{b} is not on topology {tid}")
        fwd, bwd = ring_arcs(graph, tid, a, b)
        cf, cb = _arc_cost(graph, fwd), _arc_cost(graph, bwd)
        if cf < cb or (cf == cb and fwd <= bwd):
            return fwd, bwd
        return bwd, fwd
    if topo.kind is TopologyKind.DUAL_HOMING:
        if a not in order:
            raise ExpansionError(f"{a} is not on chain {tid}")
        first, last = order[0], order[-1]
        if b is None:
            to_first = chain_path(graph, tid, a, first) if a != first else []
            to_last = chain_path(graph, tid, a, last) if a != last else []
            c1, c2 = _arc_cost(graph, to_first), _arc_cost(graph, to_last)
            if not to_first or (to_last and (c2 < c1 or (c2 == c1 and to_last < to_first))):
                return to_last, to_first
            return to_first, to_last
        if b not in order or a == b:
            raise ExpansionError(f"chain crossing {a}->{b} is not on topology {tid}")
        working = chain_path(graph, tid, a, b)
        if b in (first, last) and a not in (first, last):
            other = first if b == last else last
            return working, chain_path(graph, tid, a, other)
        return working, []
    raise ExpansionError(f"topology {tid} has no special-edge representation")


def expand_special_edge(
    graph: AuxGraph, edge: Union[str, Tuple[str, str]], from_node: Optional[str] = None
) -> Tuple[List[str], List[str]]:
    """Member-link arcs behind a special-edge crossing.

    Args:
        graph: The graph.
        edge: A ring special edge id, a single dual-homing edge id, or the
            pair of dual-homing edges entering and leaving a hub.
        from_node: Node the crossing starts from; defaults to the edge's
            first endpoint.

    Returns:
        ``(working, protection)`` member edge ids in travel order.
    """
    if isinstance(edge, tuple):
        first, second = (graph.edge(x) for x in edge)
        if first.topology_id != second.topology_id or first.kind not in (EdgeKind.DH_SPECIAL, EdgeKind.DH_HUB_LEG):
            raise ExpansionError("hub crossing must use two edges of one dual-homing topology")
        hub = first.v if first.kind is EdgeKind.DH_SPECIAL else first.u
        if hub not in (second.u, second.v):
            raise ExpansionError("hub crossing edges do not meet at the hub")
        a = first.other(hub)
        b = second.other(hub)
        if from_node is not None and from_node == b:
            a, b = b, a
        return topology_arcs(graph, first.topology_id, a, b)
    e = graph.edge(edge)
    if e.kind is EdgeKind.RING_SPECIAL:
        a = from_node or e.u
        return topology_arcs(graph, e.topology_id, a, e.other(a))
    if e.kind is EdgeKind.DH_SPECIAL:
        return topology_arcs(graph, e.topology_id, e.u, None)
    raise ExpansionError(f"edge {edge} is not expandable on its own")


def special_crossings(graph: AuxGraph, nodes: Sequence[str], edge_ids: Sequence[str]) -> List[Tuple[Tuple[int, ...], List[str], List[str]]]:
    """Every special-edge crossing along a path with its expansion.

    Returns:
        ``(positions, working, protection)`` per crossing; positions index
        ``edge_ids``.
    """
    out = []
    i = 0
    while i < len(edge_ids):
        e = graph.edge(edge_ids[i])
        if e.kind is EdgeKind.RING_SPECIAL:
            w, p = expand_special_edge(graph, e.id, nodes[i])
            out.append(((i,), w, p))
        elif e.kind in (EdgeKind.DH_SPECIAL, EdgeKind.DH_HUB_LEG):
            nxt = graph.edge(edge_ids[i + 1]) if i + 1 < len(edge_ids) else None
            hub = nodes[i + 1]
            if nxt is not None and nxt.topology_id == e.topology_id and graph.node(hub).kind.value == "HUB":
                w, p = expand_special_edge(graph, (e.id, nxt.id), nodes[i])
                out.append(((i, i + 1), w, p))
                i += 2
                continue
            if e.kind is EdgeKind.DH_SPECIAL:
                w, p = expand_special_edge(graph, e.id)
                out.append(((i,), w, p))
        i += 1
    return out
