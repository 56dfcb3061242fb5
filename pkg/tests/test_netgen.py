from __future__ import annotations

from collections import Counter
from dataclasses import replace

import pytest

from mlpce.graph import EdgeKind, build_auxiliary_graph
from mlpce.model import RateKind, TopologyKind, ValidationError
from mlpce.netgen import (
    REQUEST_RATES,
    GenParams,
    calibrate_random_rings,
    expected_counts,
    generate,
    generate_requests,
)
from mlpce.provisioner import PathType

NO_STRUCTURES = dict(agg_rings_per_location=0, dh_rings_per_location=0, random_agg_rings_per_location=0)


@pytest.fixture(scope="module")
def full():
    net = generate()
    return net, build_auxiliary_graph(net)


def specials_per_topology(graph):
    out = Counter()
    for e in graph.edges:
        if e.kind in (EdgeKind.RING_SPECIAL, EdgeKind.DH_SPECIAL, EdgeKind.DH_HUB_LEG):
            out[e.topology_id] += 1
    return out


class TestCounts:
    def test_full_counts_match_closed_form(self, full):
        net, g = full
        want = expected_counts(GenParams())
        assert len(net.elements) == want["network_elements"] == 2955
        got = g.counts()
        for key in ("tech_layer_nodes", "hub_nodes", "adaptation_edges", "physical_links", "special_edges", "edges"):
            assert got[key] == want[key], key
        assert got["logical_links"] == 0

    def test_calibration(self):
        assert calibrate_random_rings() == GenParams().random_agg_rings_per_location == 30
        with pytest.raises(ValidationError):
            calibrate_random_rings(2956)

    def test_zero_structures(self):
        net = generate(GenParams(**NO_STRUCTURES))
        assert len(net.elements) == expected_counts(GenParams(**NO_STRUCTURES))["network_elements"] == 75

    @pytest.mark.parametrize("seed", [1, 7])
    def test_counts_do_not_depend_on_seed(self, seed):
        p = GenParams.desk_scale(seed=seed)
        g = build_auxiliary_graph(generate(p))
        assert g.counts() == build_auxiliary_graph(generate(GenParams.desk_scale())).counts()

    def test_special_edges_per_topology(self, full):
        net, g = full
        per = specials_per_topology(g)
        hubs = Counter(n.topology_id for n in g.nodes if n.topology_id is not None)
        for tid, topo in net.topologies.items():
            k = len(topo.member_links)
            if topo.kind is TopologyKind.CORE_RING:
                assert per[tid] == k * (k - 1) // 2
            elif topo.kind is TopologyKind.RING_WITH_AGG:
                assert per[tid] == k - 1
            elif topo.kind is TopologyKind.DUAL_HOMING:
                assert per[tid] == (k + 1 - 2) + 2
                assert hubs[tid] == 1
            else:
                assert per[tid] == 0


class TestDeterminism:
    def test_same_seed_same_graph(self):
        a = build_auxiliary_graph(generate(GenParams.desk_scale(seed=3)))
        b = build_auxiliary_graph(generate(GenParams.desk_scale(seed=3)))
        assert a.digest() == b.digest()

    def test_seed_changes_distances(self):
        a = generate(GenParams.desk_scale(seed=0))
        b = generate(GenParams.desk_scale(seed=1))
        assert [l.distance_km for l in a.links.values()] != [l.distance_km for l in b.links.values()]

    def test_validates(self, full):
        full[0].validate()
        generate(GenParams(**NO_STRUCTURES)).validate()


class TestParams:
    @pytest.mark.parametrize(
        "kw",
        [
            {"nld_locations": 0},
            {"nld_links": -1},
            {"nld_locations": 4, "nld_links": 7},
            {"nld_locations": 4, "nld_links": 3},
            {"ring_km": (5.0, 1.0)},
            {"dh_ring_nodes": 2},
        ],
    )
    def test_invalid(self, kw):
        with pytest.raises(ValidationError):
            GenParams(**kw)

    def test_dict_roundtrip(self):
        p = GenParams.desk_scale(seed=9, ring_km=(2, 3))
        assert GenParams.from_dict(p.to_dict()) == p

    def test_unknown_key(self):
        with pytest.raises(ValidationError):
            GenParams.from_dict({"nld_location": 3})

    def test_replace_keeps_validation(self):
        with pytest.raises(ValidationError):
            replace(GenParams(), metro_core_nodes=0)


class TestRequests:
    def test_empty(self, desk_network):
        assert generate_requests(desk_network, 0) == []

    def test_deterministic(self, desk_network):
        assert generate_requests(desk_network, 50, seed=4) == generate_requests(desk_network, 50, seed=4)

    def test_shape(self, desk_network):
        reqs = generate_requests(desk_network, 400, seed=2, path_type=PathType.UNPROTECTED)
        assert {r.layer_rate for r in reqs} == set(REQUEST_RATES)
        for r in reqs:
            assert r.path_type is PathType.UNPROTECTED and r.src_ne != r.dst_ne
            if r.layer_rate is RateKind.ETH_BW:
                assert 1 <= r.capacity_mbps <= 200 and r.capacity_mbps.denominator == 1
        assert len({r.id for r in reqs}) == len(reqs)

    def test_rates_uniform(self, desk_network):
        # Chi-square goodness of fit against four equal cells, pooled over 20 seeds.
        counts = Counter()
        for seed in range(20):
            counts.update(r.layer_rate for r in generate_requests(desk_network, 200, seed=seed))
        n = sum(counts.values())
        chi2 = sum((counts[r] - n / 4) ** 2 / (n / 4) for r in REQUEST_RATES)
        assert chi2 < 16.27  # 3 degrees of freedom, p = 0.001

    def test_endpoints_can_terminate(self, desk_network):
        for r in generate_requests(desk_network, 200, seed=5):
            for ne in (r.src_ne, r.dst_ne):
                layers = {tl.technology.value for tl in desk_network.elements[ne].supported if tl.layer == "SERVICE"}
                assert ("ETH" if r.layer_rate is RateKind.ETH_BW else "SDH") in layers

    def test_negative(self, desk_network):
        with pytest.raises(ValidationError):
            generate_requests(desk_network, -1)
