from __future__ import annotations

import random

import numpy as np
import pytest

from oracles import Enumeration, best_lpp
from randgraphs import random_aux_graph

from mlpce.graph import AuxEdge, AuxGraph, AuxNode, EdgeKind, NodeKind, build_auxiliary_graph, node_id
from mlpce.model import Link, Network, NetworkElement, RateKind, TechLayer, Technology, Topology, TopologyKind
from mlpce.paths import (
    ExpansionError,
    decode_stack,
    dijkstra_shortest_path,
    encode_stack,
    expand_special_edge,
    explore_edge,
    find_lpp,
    find_unprotected_path,
    replay_stacks,
    special_crossings,
    split_segments,
    srlg_conflict_mask,
    topology_member_mask,
    yen_k_shortest,
)

SDH_SVC = TechLayer(Technology.SDH, "SERVICE")
VC4 = TechLayer(Technology.SDH, "VC4")
MS = TechLayer(Technology.SDH, "MS")
ODU = TechLayer(Technology.OTN, "ODU")
ETH_SVC = TechLayer(Technology.ETH, "SERVICE")
ETH_LINK = TechLayer(Technology.ETH, "LINK")
TUNNEL = TechLayer(Technology.MPLS_TP, "TUNNEL")


def mk(nodes, edges):
    """Graph from ``{name: tech_layer}`` and ``(id, u, v, weight[, kind, extra])`` tuples."""
    g = AuxGraph()
    for name, tl in nodes.items():
        g.add_node(AuxNode(name, NodeKind.TECH_LAYER, name.split(".")[0], tl))
    for spec in edges:
        eid, u, v, w = spec[:4]
        kind = spec[4] if len(spec) > 4 else EdgeKind.PHYSICAL
        extra = spec[5] if len(spec) > 5 else {}
        g.add_edge(AuxEdge(eid, u, v, kind, **extra))
        g.set_initial_weight(eid, float(w))
    return g


def node(name, tl):
    return AuxNode(name, NodeKind.TECH_LAYER, name, tl)


class TestExploreEdge:
    def test_empty_stack_pushes_current(self):
        e = AuxEdge("a", "x", "y", EdgeKind.ADAPTATION)
        ok, st = explore_edge(e, node("x", ETH_SVC), node("y", TUNNEL), ())
        assert ok and st == (ETH_SVC,)

    def test_mismatched_pop(self):
        # OTN ODU -> ETH LINK, server to client, with VC4 on top.
        e = AuxEdge("a", "eth", "odu", EdgeKind.ADAPTATION)
        ok, st = explore_edge(e, node("odu", ODU), node("eth", ETH_LINK), (VC4,))
        assert not ok and st == (VC4,)

    def test_matched_pop(self):
        e = AuxEdge("a", "vc4", "odu", EdgeKind.ADAPTATION)
        ok, st = explore_edge(e, node("odu", ODU), node("vc4", VC4), (VC4,))
        assert ok and st == ()

    def test_client_to_server_pushes(self):
        e = AuxEdge("a", "vc4", "odu", EdgeKind.ADAPTATION)
        ok, st = explore_edge(e, node("vc4", VC4), node("odu", ODU), (SDH_SVC,))
        assert ok and st == (SDH_SVC, VC4)

    def test_depth_limit(self):
        e = AuxEdge("a", "vc4", "odu", EdgeKind.ADAPTATION)
        ok, _ = explore_edge(e, node("vc4", VC4), node("odu", ODU), (SDH_SVC, SDH_SVC), max_depth=2)
        assert not ok

    def test_non_adaptation_untouched(self):
        e = AuxEdge("p", "x", "y", EdgeKind.PHYSICAL)
        assert explore_edge(e, node("x", VC4), node("y", VC4), (SDH_SVC,)) == (True, (SDH_SVC,))

    def test_stack_codec_roundtrip(self):
        st = (SDH_SVC, VC4, ODU, ETH_LINK)
        assert decode_stack(encode_stack(st)) == st
        assert encode_stack(()) == 0


def four_ne(exit_server_to=VC4):
    """SDH service at A and D adapted over three OTN hops A-B-C-D."""
    nodes = {"A.svc": SDH_SVC, "A.vc4": VC4, "A.odu": ODU, "B.odu": ODU, "C.odu": ODU, "D.odu": ODU, "D.svc": SDH_SVC}
    nodes["D.x"] = exit_server_to
    edges = [
        ("a1", "A.svc", "A.vc4", 0, EdgeKind.ADAPTATION),
        ("a2", "A.vc4", "A.odu", 0, EdgeKind.ADAPTATION),
        ("p1", "A.odu", "B.odu", 1),
        ("p2", "B.odu", "C.odu", 1),
        ("p3", "C.odu", "D.odu", 1),
        ("p4", "A.odu", "C.odu", 3),
        ("a3", "D.x", "D.odu", 0, EdgeKind.ADAPTATION),
        ("a4", "D.svc", "D.x", 0, EdgeKind.ADAPTATION),
    ]
    return mk(nodes, edges)


class TestShortestPath:
    def test_parallel_edges(self):
        g = mk({"x": VC4, "y": VC4}, [("e2", "x", "y", 2), ("e1", "x", "y", 1)])
        p = dijkstra_shortest_path(g, "x", "y")
        assert p.edges == ("e1",) and p.total_cost == 1.0

    def test_push_pop_across_four_elements(self):
        g = four_ne()
        p = dijkstra_shortest_path(g, "A.svc", "D.svc")
        assert p.edges == ("a1", "a2", "p1", "p2", "p3", "a3", "a4")
        assert p.end_stack == ()
        ref = Enumeration(g, g.column("w_init"), "A.svc", "D.svc")
        assert not ref.binding
        assert ref.paths[0].edges == p.edges and ref.paths[0].cost == p.total_cost
        assert len(ref.paths) == 2

    def test_mismatched_exit(self):
        g = four_ne(exit_server_to=ETH_LINK)
        assert dijkstra_shortest_path(g, "A.svc", "D.svc") is None
        assert Enumeration(g, g.column("w_init"), "A.svc", "D.svc").paths == []

    def test_tie_on_cost_prefers_fewer_hops(self):
        g = mk({"x": VC4, "m": VC4, "y": VC4}, [("a", "x", "m", 1), ("b", "m", "y", 1), ("z", "x", "y", 2)])
        assert dijkstra_shortest_path(g, "x", "y").edges == ("z",)

    def test_tie_on_hops_prefers_smaller_ids(self):
        g = mk({"x": VC4, "m": VC4, "n": VC4, "y": VC4}, [("d", "x", "m", 1), ("a", "m", "y", 1), ("c", "x", "n", 1), ("b", "n", "y", 1)])
        assert dijkstra_shortest_path(g, "x", "y").edges == ("c", "b")

    def test_target_and_init_stack(self):
        g = four_ne()
        p = dijkstra_shortest_path(g, "A.odu", "D.odu", init_stack=(SDH_SVC, VC4), target_stack=(SDH_SVC, VC4))
        assert p.edges == ("p1", "p2", "p3")

    def test_mask_and_weights(self):
        g = four_ne()
        mask = np.ones(g.n_edges, dtype=bool)
        mask[g.edge_index("p2")] = False
        assert "p4" in dijkstra_shortest_path(g, "A.svc", "D.svc", mask=mask).edges
        w = g.column("w_init").copy()
        w[g.edge_index("p1")] = 10
        assert "p4" in dijkstra_shortest_path(g, "A.svc", "D.svc", weights=w).edges

    def test_bad_arguments(self):
        g = four_ne()
        with pytest.raises(ValueError):
            dijkstra_shortest_path(g, "A.svc", "A.svc")
        with pytest.raises(KeyError):
            dijkstra_shortest_path(g, "A.svc", "nowhere")
        with pytest.raises(ValueError):
            yen_k_shortest(g, "A.svc", "D.svc", 0)
        w = g.column("w_init").copy()
        w[0] = -1
        with pytest.raises(ValueError):
            dijkstra_shortest_path(g, "A.svc", "D.svc", weights=w)


class TestYen:
    def test_triangle(self):
        g = mk({"a": VC4, "b": VC4, "c": VC4}, [("ab", "a", "b", 1), ("bc", "b", "c", 1), ("ac", "a", "c", 1)])
        paths = yen_k_shortest(g, "a", "c", 2)
        assert [p.edges for p in paths] == [("ac",), ("ab", "bc")]
        assert [p.total_cost for p in paths] == [1.0, 2.0]

    def test_k1_is_dijkstra(self):
        g = four_ne()
        assert yen_k_shortest(g, "A.svc", "D.svc", 1)[0] == dijkstra_shortest_path(g, "A.svc", "D.svc")

    def test_fewer_than_k(self):
        g = four_ne()
        assert len(yen_k_shortest(g, "A.svc", "D.svc", 4)) == 2

    @pytest.mark.parametrize("seed", range(25))
    def test_random_eight_node_graphs(self, seed):
        rng = random.Random(seed)
        while True:
            g, s, d = random_aux_graph(rng, max_nodes=8, max_edges=20)
            ref = Enumeration(g, g.column("w_init"), s, d)
            if not ref.binding:
                break
        got = yen_k_shortest(g, s, d, 4)
        assert [(p.edges, p.total_cost) for p in got] == [(r.edges, r.cost) for r in ref.paths[:4]]


def ring_network(kind=TopologyKind.RING_WITH_AGG, names=("b", "f", "g", "h"), aggregates=("b",)):
    net = Network()
    for n in names:
        net.add_element(NetworkElement(n, "L", frozenset({SDH_SVC, VC4, MS}), frozenset({(SDH_SVC, VC4), (VC4, MS)})))
    ids = []
    for i, a in enumerate(names):
        b = names[(i + 1) % len(names)]
        net.add_link(Link(f"{a}-{b}", a, b, MS, RateKind.STM16, 1.0, srlg_ids=frozenset({f"r{i}"})))
        ids.append(f"{a}-{b}")
    net.add_topology(Topology("T", kind, ids, list(aggregates)))
    return net


class TestUnprotected:
    def test_special_only_connection(self):
        g = mk({"x": MS, "y": MS}, [("s", "x", "y", 1, EdgeKind.RING_SPECIAL, {"self_protected": True})])
        before = g.digest()
        assert find_unprotected_path(g, "x", "y") == []
        assert find_unprotected_path(g, "x", "y", 3) == []
        assert g.digest() == before

    def test_plain_chain(self):
        g = mk({"x": MS, "m": MS, "y": MS}, [("p", "x", "m", 1), ("q", "m", "y", 1)])
        before = g.digest()
        assert [p.edges for p in find_unprotected_path(g, "x", "y")] == [("p", "q")]
        assert g.digest() == before


class TestLpp:
    def test_square(self):
        g = mk(
            {"a": MS, "b": MS, "c": MS, "d": MS},
            [("ab", "a", "b", 1), ("bc", "b", "c", 1), ("cd", "c", "d", 1), ("da", "d", "a", 1)],
        )
        (pair,) = find_lpp(g, "a", "c", 1)
        assert pair.working.edges == ("ab", "bc")
        assert [(seg, p.edges) for seg, p in pair.protection] == [((0, 2), ("da", "cd"))]
        assert pair.combined_cost == 4.0

    def test_srlg_discards_candidate(self):
        shared = {"srlg_ids": frozenset({"s"})}
        g = mk(
            {"a": MS, "b": MS, "c": MS, "d": MS},
            [("ab", "a", "b", 1, EdgeKind.PHYSICAL, shared), ("bc", "b", "c", 1), ("cd", "c", "d", 1, EdgeKind.PHYSICAL, shared), ("da", "d", "a", 1)],
        )
        assert find_lpp(g, "a", "c", 1) == []
        ref, _, _ = best_lpp(g, g.column("w_init"), "a", "c")
        assert ref is None
        # A third, risk-free route revives the pair.
        g.add_node(AuxNode("e", NodeKind.TECH_LAYER, "e", MS))
        g.add_edge(AuxEdge("ae", "a", "e", EdgeKind.PHYSICAL))
        g.add_edge(AuxEdge("ec", "e", "c", EdgeKind.PHYSICAL))
        g.set_initial_weight("ae", 2.0)
        g.set_initial_weight("ec", 2.0)
        found = find_lpp(g, "a", "c", 3)
        ref, _, _ = best_lpp(g, g.column("w_init"), "a", "c")
        assert found[0].working.edges == ref.working.edges
        assert found[0].protection[0][1].edges == ref.protection[0][1].edges == ("ae", "ec")

    def test_self_protected_special_only(self):
        g = build_auxiliary_graph(ring_network())
        before = g.digest()
        (pair,) = find_lpp(g, node_id("f", MS), node_id("b", MS), 1)
        assert [g.edge(x).kind for x in pair.working.edges] == [EdgeKind.RING_SPECIAL]
        assert pair.protection == ()
        assert g.digest() == before

    def test_member_links_hidden(self):
        g = build_auxiliary_graph(ring_network())
        mask = topology_member_mask(g)
        assert sorted(g.edges[i].id for i in np.flatnonzero(mask)) == sorted(g.topology_links["T"])

    def test_adaptations_join_following_segment(self):
        g = mk(
            {"x.svc": SDH_SVC, "x": VC4, "y": VC4, "z": VC4, "z.svc": SDH_SVC},
            [
                ("a1", "x.svc", "x", 0, EdgeKind.ADAPTATION),
                ("s", "x", "y", 1, EdgeKind.PHYSICAL, {"self_protected": True}),
                ("p", "y", "z", 1),
                ("a2", "z.svc", "z", 0, EdgeKind.ADAPTATION),
            ],
        )
        assert split_segments(g, ["a1", "s", "p", "a2"]) == [(0, 2, True), (2, 4, False)]
        assert split_segments(g, ["a1", "a2"]) == [(0, 2, False)]

    def test_srlg_conflict_mask_skips_adaptations(self):
        g = mk(
            {"x": VC4, "y": VC4, "x.s": SDH_SVC},
            [("p", "x", "y", 1, EdgeKind.PHYSICAL, {"srlg_ids": frozenset({"r"})}), ("q", "x", "y", 1, EdgeKind.PHYSICAL, {"srlg_ids": frozenset({"r"})}), ("a", "x.s", "x", 0, EdgeKind.ADAPTATION)],
        )
        mask = srlg_conflict_mask(g, ["a", "p"])
        assert [g.edges[i].id for i in np.flatnonzero(mask)] == ["p", "q"]

    @pytest.mark.parametrize("seed", range(20))
    def test_random_graphs_against_pairs_oracle(self, seed):
        rng = random.Random(1000 + seed)
        while True:
            g, s, d = random_aux_graph(rng, max_nodes=8, max_edges=16, n_srlgs=3, p_self_protected=0.2)
            ref, n, binding = best_lpp(g, g.column("w_init"), s, d)
            if not binding:
                break
        got = find_lpp(g, s, d, max(n, 1))
        if ref is None:
            assert got == []
            return
        top = got[0]
        assert top.working.edges == ref.working.edges
        assert top.combined_cost == ref.combined
        assert [(seg, p.edges) for seg, p in top.protection] == [(seg, p.edges) for seg, p in ref.protection]
        for pair in got:
            work = {x for x in pair.working.edges if g.edge(x).kind is not EdgeKind.ADAPTATION}
            for _, p in pair.protection:
                assert not work & set(p.edges)


class TestExpansion:
    def test_ring_arc(self):
        g = build_auxiliary_graph(ring_network())
        sid = next(e.id for e in g.edges_of_kind(EdgeKind.RING_SPECIAL) if g.node(e.u).ne_id == "f")
        working, protection = expand_special_edge(g, sid, node_id("f", MS))
        assert working == ["b-f"]
        assert protection == ["f-g", "g-h", "h-b"]

    def test_dual_homing_member(self):
        net = Network()
        for n in "ckld":
            net.add_element(NetworkElement(n, "L", frozenset({MS}), frozenset()))
        for a, b in (("c", "k"), ("k", "l"), ("l", "d")):
            net.add_link(Link(f"{a}-{b}", a, b, MS, RateKind.STM16, 1.0))
        net.add_topology(Topology("T", TopologyKind.DUAL_HOMING, ["c-k", "k-l", "l-d"], ["c", "d"]))
        g = build_auxiliary_graph(net)
        assert expand_special_edge(g, "D:T:k") == (["c-k"], ["k-l", "l-d"])
        # Crossing k -> hub -> d exits through d, so protection leaves through c.
        assert expand_special_edge(g, ("D:T:k", "H:T:d")) == (["k-l", "l-d"], ["c-k"])
        nodes = [node_id("k", MS), "hub#T", node_id("d", MS)]
        assert special_crossings(g, nodes, ["D:T:k", "H:T:d"]) == [((0, 1), ["k-l", "l-d"], ["c-k"])]

    def test_equal_arcs_tie(self):
        g = build_auxiliary_graph(ring_network(TopologyKind.CORE_RING, names=("p", "q", "r", "s"), aggregates=()))
        sid = next(e.id for e in g.edges_of_kind(EdgeKind.RING_SPECIAL) if {g.node(e.u).ne_id, g.node(e.v).ne_id} == {"p", "r"})
        working, protection = expand_special_edge(g, sid, node_id("p", MS))
        assert working == ["p-q", "q-r"]
        assert protection == ["s-p", "r-s"]

    def test_not_expandable(self):
        g = build_auxiliary_graph(ring_network())
        with pytest.raises(ExpansionError):
            expand_special_edge(g, g.topology_links["T"][0])


def test_replay_rejects_bad_sequence():
    g = four_ne(exit_server_to=ETH_LINK)
    assert replay_stacks(g, "A.svc", ["a1", "a2", "p1", "p2", "p3", "a3"]) is None
