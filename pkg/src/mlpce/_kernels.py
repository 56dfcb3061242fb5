"""Array kernels for the adaptation-aware shortest path search.

The kernels are compiled with numba when it is importable and the
``MLPCE_DISABLE_NUMBA`` environment variable is unset or ``0``. Otherwise
the same source runs as plain Python over numpy arrays.

Adaptation stacks are packed into one int64: each entry is a 4-bit
tech/layer code (1..15), the top of the stack is the low nibble and 0 is
the empty stack.
"""

from __future__ import annotations

import heapq
import os

import numpy as np

_DISABLED = os.environ.get("MLPCE_DISABLE_NUMBA", "0").strip().lower() not in ("", "0", "false", "no")

try:
    if _DISABLED:
        raise ImportError("disabled by MLPCE_DISABLE_NUMBA")
    from numba import njit as _numba_njit

    NUMBA_ENABLED = True
except ImportError:  # pragma: no cover - exercised only without numba
    _numba_njit = None
    NUMBA_ENABLED = False

JIT_OPTIONS = {"nogil": True, "cache": True}


def njit(*args, **kwargs):
    """``numba.njit`` when enabled, identity decorator otherwise."""
    if NUMBA_ENABLED:
        return _numba_njit(*args, **{**JIT_OPTIONS, **kwargs})
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda fn: fn


NIBBLE = 16
MAX_STACK_DEPTH = 15


def pack_stack(codes) -> int:
    """Pack a bottom-to-top sequence of tech/layer codes."""
    value = 0
    for code in codes:
        if not 0 < code < NIBBLE:
            raise ValueError(f"tech/layer code {code} out of range")
        value = value * NIBBLE + int(code)
    return value


def unpack_stack(value: int) -> list:
    """Inverse of :func:`pack_stack`."""
    out = []
    value = int(value)
    while value:
        out.append(value % NIBBLE)
        value //= NIBBLE
    out.reverse()
    return out


@njit
def step_stack(is_adapt, cur_is_client, cur_code, adj_code, stack, push_limit):
    """One explore-edge step. Returns ``-1`` when the move is disallowed."""
    if not is_adapt:
        return stack
    if stack == 0:
        return cur_code
    if cur_is_client:
        if stack >= push_limit:
            return -1
        return stack * NIBBLE + cur_code
    if stack % NIBBLE == adj_code:
        return stack // NIBBLE
    return -1


@njit
def _path_ranks(pred_edge, pred_node, edge_rank, node, length, out):
    # Fill out[0:length] with the ranks of the last ``length`` edges ending at node.
    i = length - 1
    while i >= 0:
        e = pred_edge[node]
        out[i] = edge_rank[e]
        node = pred_node[node]
        i -= 1


@njit
def label_dijkstra(
    indptr,
    adj_edge,
    adj_node,
    edge_client,
    edge_adapt,
    edge_w,
    edge_ok,
    node_ok,
    node_code,
    edge_rank,
    src,
    dst,
    init_stack,
    target_stack,
    init_cost,
    init_hops,
    max_depth,
):
    """Single-label Dijkstra honouring adaptation stacks.

    Labels are ordered by (cost, hops, edge-rank sequence). A node keeps one
    label; ``dst`` only accepts labels whose stack equals ``target_stack``.

    Returns:
        ``(found, cost, hops, pred_edge, pred_node)``.
    """
    n = indptr.shape[0] - 1
    inf = np.inf
    cost = np.full(n, inf)
    hops = np.zeros(n, dtype=np.int64)
    stack = np.zeros(n, dtype=np.int64)
    pred_edge = np.full(n, -1, dtype=np.int64)
    pred_node = np.full(n, -1, dtype=np.int64)
    settled = np.zeros(n, dtype=np.bool_)
    push_limit = NIBBLE ** (max_depth - 1)
    buf_a = np.zeros(n + 1, dtype=np.int64)
    buf_b = np.zeros(n + 1, dtype=np.int64)

    cost[src] = init_cost
    hops[src] = init_hops
    stack[src] = init_stack
    heap = [(init_cost, init_hops, src)]
    found = False
    while len(heap) > 0:
        c, h, u = heapq.heappop(heap)
        if settled[u] or c != cost[u] or h != hops[u]:
            continue
        settled[u] = True
        if u == dst:
            found = True
            break
        su = stack[u]
        for k in range(indptr[u], indptr[u + 1]):
            e = adj_edge[k]
            v = adj_node[k]
            if not edge_ok[e] or not node_ok[v] or settled[v]:
                continue
            sv = step_stack(edge_adapt[e], edge_client[e] == u, node_code[u], node_code[v], su, push_limit)
            if sv < 0:
                continue
            if v == dst and sv != target_stack:
                continue
            nc = c + edge_w[e]
            nh = h + 1
            better = False
            if nc < cost[v]:
                better = True
            elif nc == cost[v]:
                if nh < hops[v]:
                    better = True
                elif nh == hops[v]:
                    # Same cost and hop count: compare edge-rank sequences.
                    length = nh - init_hops
                    _path_ranks(pred_edge, pred_node, edge_rank, v, length, buf_a)
                    if length > 1:
                        _path_ranks(pred_edge, pred_node, edge_rank, u, length - 1, buf_b)
                    buf_b[length - 1] = edge_rank[e]
                    for i in range(length):
                        if buf_b[i] != buf_a[i]:
                            better = buf_b[i] < buf_a[i]
                            break
            if better:
                cost[v] = nc
                hops[v] = nh
                stack[v] = sv
                pred_edge[v] = e
                pred_node[v] = u
                heapq.heappush(heap, (nc, nh, v))
    if not found:
        return False, inf, 0, pred_edge, pred_node
    return True, cost[dst], hops[dst], pred_edge, pred_node


def warmup() -> None:
    """Compile the kernels on a two-node graph."""
    indptr = np.array([0, 1, 2], dtype=np.int64)
    adj_edge = np.array([0, 0], dtype=np.int64)
    adj_node = np.array([1, 0], dtype=np.int64)
    label_dijkstra(
        indptr,
        adj_edge,
        adj_node,
        np.array([0], dtype=np.int64),
        np.array([False]),
        np.array([1.0]),
        np.array([True]),
        np.array([True, True]),
        np.array([1, 1], dtype=np.int64),
        np.array([0], dtype=np.int64),
        0,
        1,
        0,
        0,
        0.0,
        0,
        8,
    )
