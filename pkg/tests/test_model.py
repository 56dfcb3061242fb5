from __future__ import annotations

from fractions import Fraction

import pytest

from mlpce.model import (
    CapacityError,
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
    ValidationError,
    bottleneck_pool,
    capacity_feasible,
    consume,
    demand_mbps,
    restore,
    seed_containers,
)

SDH_SVC = TechLayer(Technology.SDH, "SERVICE")
VC4 = TechLayer(Technology.SDH, "VC4")
MS = TechLayer(Technology.SDH, "MS")


def pool(avail, max_mbps=None, **containers):
    cont = tuple((RateKind(k), n) for k, n in containers.items())
    return CapacityPool(max_mbps if max_mbps is not None else avail, avail, cont)


class TestTaxonomy:
    def test_unknown_layer_rejected(self):
        with pytest.raises(ValidationError):
            TechLayer(Technology.SDH, "ODU")

    def test_unknown_technology_rejected(self):
        with pytest.raises(ValidationError):
            TechLayer("FDDI", "SERVICE")

    def test_parse_roundtrip(self):
        assert TechLayer.parse("OTN#ODU") == TechLayer(Technology.OTN, "ODU")
        assert TechLayer.parse(VC4.key()) == VC4

    def test_unknown_rate_rejected(self):
        with pytest.raises(ValidationError):
            LayerRate.of("STM256")

    def test_eth_bw_requires_capacity(self):
        with pytest.raises(ValidationError):
            demand_mbps(RateKind.ETH_BW)
        assert demand_mbps(RateKind.ETH_BW, 17) == 17


class TestCapacityFeasible:
    def test_vc3_not_available_as_single_container(self):
        assert not capacity_feasible(pool(100, VC3=0, max_mbps=135), RateKind.VC3)

    def test_zero_capacity(self):
        for rate in (RateKind.VC12, RateKind.VC4, RateKind.GE):
            assert not capacity_feasible(pool(0, max_mbps=10), rate)
        assert not capacity_feasible(pool(0, max_mbps=10), RateKind.ETH_BW, 1)

    def test_vc12_containers_free(self):
        assert capacity_feasible(pool(100, max_mbps=126, VC12=63), RateKind.VC12)

    def test_untracked_rate_uses_mbps_only(self):
        assert capacity_feasible(pool(1000), RateKind.GE)
        assert not capacity_feasible(pool(999), RateKind.GE)


class TestConsumeRestore:
    def test_consume_example(self):
        p = consume(pool(10, VC12=2), RateKind.VC12)
        assert p.available_mbps == 8
        assert p.container_count(RateKind.VC12) == 1

    def test_inverse(self):
        p = CapacityPool.for_rate(RateKind.STM16)
        for rate, cap in ((RateKind.VC12, None), (RateKind.VC4, None), (RateKind.ETH_BW, Fraction(7, 3))):
            assert restore(consume(p, rate, cap), rate, cap) == p

    def test_consume_infeasible(self):
        with pytest.raises(CapacityError):
            consume(pool(1), RateKind.VC12)

    def test_restore_beyond_max(self):
        with pytest.raises(ValidationError):
            restore(CapacityPool.for_rate(RateKind.STM1), RateKind.VC12)

    def test_exact_rational_accounting(self):
        p = pool(1)
        for _ in range(3):
            p = consume(p, RateKind.ETH_BW, Fraction(1, 3))
        assert p.available_mbps == 0


class TestPools:
    def test_stm_seeding(self):
        assert seed_containers(RateKind.STM16) == {RateKind.VC4: 16, RateKind.VC3: 48, RateKind.VC12: 1008}

    def test_vc4_bearer(self):
        p = CapacityPool.for_rate(RateKind.VC4)
        assert p.max_mbps == 150
        assert dict(p.containers) == {RateKind.VC4: 1, RateKind.VC3: 3, RateKind.VC12: 63}

    def test_och_channels(self):
        p = CapacityPool.for_rate(RateKind.OCH, 80)
        assert p.max_mbps == 800000
        assert p.container_count(RateKind.OCH) == 80

    def test_bottleneck(self):
        b = bottleneck_pool([CapacityPool.for_rate(RateKind.STM16), CapacityPool.for_rate(RateKind.STM4)])
        assert b.max_mbps == b.available_mbps == 622
        assert b.container_count(RateKind.VC4) == 4

    def test_invalid_pool(self):
        with pytest.raises(ValidationError):
            CapacityPool(10, 11)


def _net():
    net = Network()
    for i in range(4):
        net.add_element(NetworkElement(f"E{i}", "L", frozenset({SDH_SVC, VC4, MS}), frozenset({(SDH_SVC, VC4), (VC4, MS)})))
    return net


class TestNetworkValidation:
    def test_dangling_endpoint(self):
        net = _net()
        net.add_link(Link("K1", "E0", "E9", MS, RateKind.STM1, 1.0))
        with pytest.raises(ValidationError, match="K1"):
            net.validate()

    def test_unsupported_port(self):
        net = _net()
        net.add_link(Link("K1", "E0", "E1", TechLayer(Technology.ETH, "LINK"), RateKind.GE, 1.0))
        with pytest.raises(ValidationError):
            net.validate()

    def test_adaptation_needs_support(self):
        ne = NetworkElement("X", "L", frozenset({SDH_SVC}), frozenset({(SDH_SVC, VC4)}))
        with pytest.raises(ValidationError):
            ne.validate()

    def test_core_ring_needs_three_nodes(self):
        net = _net()
        net.add_link(Link("K1", "E0", "E1", MS, RateKind.STM1, 1.0))
        net.add_link(Link("K2", "E1", "E0", MS, RateKind.STM1, 1.0))
        net.add_topology(Topology("T", TopologyKind.CORE_RING, ["K1", "K2"]))
        with pytest.raises(ValidationError):
            net.validate()

    def test_ring_must_close(self):
        net = _net()
        net.add_link(Link("K1", "E0", "E1", MS, RateKind.STM1, 1.0))
        net.add_link(Link("K2", "E1", "E2", MS, RateKind.STM1, 1.0))
        net.add_link(Link("K3", "E2", "E3", MS, RateKind.STM1, 1.0))
        net.add_topology(Topology("T", TopologyKind.CORE_RING, ["K1", "K2", "K3"]))
        with pytest.raises(ValidationError):
            net.validate()

    def test_dual_homing_chain(self):
        net = _net()
        net.add_link(Link("K1", "E0", "E1", MS, RateKind.STM1, 1.0))
        net.add_link(Link("K2", "E1", "E2", MS, RateKind.STM1, 1.0))
        net.add_topology(Topology("T", TopologyKind.DUAL_HOMING, ["K1", "K2"], ["E0", "E2"]))
        net.validate()
        net.topologies["T"].aggregate_nodes = ["E0", "E3"]
        with pytest.raises(ValidationError):
            net.validate()

    def test_srlg_registry(self):
        net = _net()
        net.add_link(Link("K1", "E0", "E1", MS, RateKind.STM1, 1.0, srlg_ids=frozenset({"S"})))
        net.add_link(Link("K2", "E0", "E1", MS, RateKind.STM1, 1.0, srlg_ids=frozenset({"S"})))
        assert net.srlgs["S"].member_links == {"K1", "K2"}
