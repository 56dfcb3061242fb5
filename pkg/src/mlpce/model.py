"""Domain types shared by every other module.

Covers the technology/layer taxonomy, layer rates, capacity pools with
exact rational accounting, and the static network description (network
elements, links, topologies and shared risk groups) consumed by the graph
builder.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Dict, Iterable, List, Mapping, Optional, Tuple


class ValidationError(ValueError):
    """Raised when an input violates a structural or taxonomy rule."""


class CapacityError(RuntimeError):
    """Raised when a pool cannot satisfy a consume request."""


class Technology(str, enum.Enum):
    PDH = "PDH"
    SDH = "SDH"
    OTN = "OTN"
    WDM = "WDM"
    ETH = "ETH"
    MPLS_TP = "MPLS-TP"


# Fixed taxonomy. MS is the SDH multiplex-section layer that physical STM-N
# links terminate on, so VC4 trails can be modelled as logical links above it.
TAXONOMY: Dict[Technology, Tuple[str, ...]] = {
    Technology.PDH: ("SERVICE",),
    Technology.SDH: ("SERVICE", "VC4", "MS"),
    Technology.OTN: ("ODU", "OTU"),
    Technology.WDM: ("OCH",),
    Technology.ETH: ("SERVICE", "LINK"),
    Technology.MPLS_TP: ("TUNNEL",),
}


@dataclass(frozen=True, order=True)
class TechLayer:
    """A (technology, layer) pair, validated against :data:`TAXONOMY`."""

    technology: Technology
    layer: str

    def __post_init__(self) -> None:
        tech = self.technology
        if not isinstance(tech, Technology):
            try:
                tech = Technology(tech)
            except ValueError as exc:
                raise ValidationError(f"unknown technology {self.technology!r}") from exc
            object.__setattr__(self, "technology", tech)
        if self.layer not in TAXONOMY[tech]:
            raise ValidationError(f"layer {self.layer!r} is not defined for {tech.value}")

    @property
    def is_service(self) -> bool:
        return self.layer == "SERVICE"

    def key(self) -> str:
        return f"{self.technology.value}#{self.layer}"

    @classmethod
    def parse(cls, text: str) -> "TechLayer":
        tech, _, layer = text.partition("#")
        if not layer:
            tech, _, layer = text.partition(":")
        return cls(Technology(tech), layer)

    def __str__(self) -> str:
        return self.key()


def all_tech_layers() -> List[TechLayer]:
    """Every legal tech/layer pair in a stable order."""
    return [TechLayer(t, layer) for t in Technology for layer in TAXONOMY[t]]


TL_CODES: Dict[TechLayer, int] = {tl: i + 1 for i, tl in enumerate(all_tech_layers())}
"""Small positive integer codes used by the array kernels (0 means none)."""


class RateKind(str, enum.Enum):
    VC12 = "VC12"
    VC3 = "VC3"
    VC4 = "VC4"
    STM1 = "STM1"
    STM4 = "STM4"
    STM16 = "STM16"
    STM64 = "STM64"
    GE = "GE"
    TENGE = "TENGE"
    ETH_BW = "ETH_BW"
    ODU2 = "ODU2"
    OTU2 = "OTU2"
    OCH = "OCH"


RATE_MBPS: Dict[RateKind, Fraction] = {
    RateKind.VC12: Fraction(2),
    RateKind.VC3: Fraction(45),
    RateKind.VC4: Fraction(150),
    RateKind.STM1: Fraction(155),
    RateKind.STM4: Fraction(622),
    RateKind.STM16: Fraction(2488),
    RateKind.STM64: Fraction(9953),
    RateKind.GE: Fraction(1000),
    RateKind.TENGE: Fraction(10000),
    RateKind.ODU2: Fraction(10000),
    RateKind.OTU2: Fraction(10000),
    RateKind.OCH: Fraction(10000),
}

# Rates a pool may track as discrete single-rate containers.
CONTAINER_RATES: Tuple[RateKind, ...] = (
    RateKind.VC12,
    RateKind.VC3,
    RateKind.VC4,
    RateKind.ODU2,
    RateKind.OCH,
)

_STM_ORDER = {RateKind.STM1: 1, RateKind.STM4: 4, RateKind.STM16: 16, RateKind.STM64: 64}

SERVICE_LAYER_OF_RATE: Dict[RateKind, TechLayer] = {
    RateKind.VC12: TechLayer(Technology.SDH, "SERVICE"),
    RateKind.VC3: TechLayer(Technology.SDH, "SERVICE"),
    RateKind.VC4: TechLayer(Technology.SDH, "SERVICE"),
    RateKind.ETH_BW: TechLayer(Technology.ETH, "SERVICE"),
    RateKind.GE: TechLayer(Technology.ETH, "SERVICE"),
    RateKind.TENGE: TechLayer(Technology.ETH, "SERVICE"),
}

# Container reserved on the server path when a logical link is created at a
# given client layer.
LOGICAL_CONTAINER: Dict[TechLayer, RateKind] = {
    TechLayer(Technology.SDH, "VC4"): RateKind.VC4,
    TechLayer(Technology.SDH, "MS"): RateKind.STM64,
    TechLayer(Technology.ETH, "LINK"): RateKind.TENGE,
    TechLayer(Technology.OTN, "ODU"): RateKind.ODU2,
    TechLayer(Technology.OTN, "OTU"): RateKind.OCH,
    TechLayer(Technology.MPLS_TP, "TUNNEL"): RateKind.GE,
    TechLayer(Technology.WDM, "OCH"): RateKind.OCH,
}


@dataclass(frozen=True)
class LayerRate:
    """A layer rate and its Mbps equivalent.

    Fixed-rate kinds take their value from :data:`RATE_MBPS`. ``ETH_BW`` is
    the only variable kind; its value is the requested bandwidth.
    """

    kind: RateKind
    mbps: Fraction

    def __post_init__(self) -> None:
        if not isinstance(self.kind, RateKind):
            try:
                object.__setattr__(self, "kind", RateKind(self.kind))
            except ValueError as exc:
                raise ValidationError(f"unknown layer rate {self.kind!r}") from exc
        mbps = Fraction(self.mbps)
        if mbps <= 0:
            raise ValidationError("layer rate must be positive")
        object.__setattr__(self, "mbps", mbps)

    @classmethod
    def of(cls, kind: RateKind | str, capacity_mbps: Optional[Fraction | int | str] = None) -> "LayerRate":
        try:
            kind = RateKind(kind)
        except ValueError as exc:
            raise ValidationError(f"unknown layer rate {kind!r}") from exc
        if kind is RateKind.ETH_BW:
            if capacity_mbps is None:
                raise ValidationError("ETH_BW needs an explicit capacity")
            return cls(kind, Fraction(capacity_mbps))
        return cls(kind, RATE_MBPS[kind])


def demand_mbps(rate: RateKind | LayerRate, capacity_mbps: Optional[Fraction | int] = None) -> Fraction:
    """Mbps demanded by a request of ``rate``.

    ``capacity_mbps`` only matters for ``ETH_BW``; fixed rates imply their
    own capacity.
    """
    if isinstance(rate, LayerRate):
        return rate.mbps
    try:
        kind = RateKind(rate)
    except ValueError as exc:
        raise ValidationError(f"unknown layer rate {rate!r}") from exc
    if kind is RateKind.ETH_BW:
        if capacity_mbps is None or Fraction(capacity_mbps) <= 0:
            raise ValidationError("ETH_BW demand must be positive")
        return Fraction(capacity_mbps)
    return RATE_MBPS[kind]


def seed_containers(rate: RateKind, count: int = 1) -> Dict[RateKind, int]:
    """Free containers offered by ``count`` bearers of ``rate``."""
    if rate in _STM_ORDER:
        n = _STM_ORDER[rate] * count
        return {RateKind.VC4: n, RateKind.VC3: 3 * n, RateKind.VC12: 63 * n}
    if rate is RateKind.VC4:
        return {RateKind.VC4: count, RateKind.VC3: 3 * count, RateKind.VC12: 63 * count}
    if rate in (RateKind.ODU2, RateKind.OTU2):
        return {RateKind.ODU2: count}
    if rate is RateKind.OCH:
        return {RateKind.OCH: count}
    return {}


@dataclass(frozen=True)
class CapacityPool:
    """Exact capacity of one edge.

    ``containers`` counts free single-rate containers. It is an independent
    feasibility gate next to the Mbps balance; ``container_max`` keeps the
    seeded counts so restores can be bounded.
    """

    max_mbps: Fraction
    available_mbps: Fraction
    containers: Tuple[Tuple[RateKind, int], ...] = ()
    container_max: Tuple[Tuple[RateKind, int], ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "max_mbps", Fraction(self.max_mbps))
        object.__setattr__(self, "available_mbps", Fraction(self.available_mbps))
        if not 0 <= self.available_mbps <= self.max_mbps:
            raise ValidationError("pool requires 0 <= available <= max")
        cmax = dict(self.container_max) if self.container_max else dict(self.containers)
        cur = dict(self.containers)
        if set(cmax) != set(cur):
            raise ValidationError("container kinds differ between current and max")
        for kind, n in cur.items():
            if n < 0 or n > cmax[kind]:
                raise ValidationError(f"container count for {kind.value} out of range")
            if cmax[kind] * RATE_MBPS[kind] > self.max_mbps:
                raise ValidationError(f"container total for {kind.value} exceeds pool size")
        object.__setattr__(self, "containers", tuple(sorted(cur.items(), key=lambda kv: kv[0].value)))
        object.__setattr__(self, "container_max", tuple(sorted(cmax.items(), key=lambda kv: kv[0].value)))

    @classmethod
    def for_rate(cls, rate: RateKind, count: int = 1) -> "CapacityPool":
        """Pool for ``count`` bearers of ``rate`` with containers seeded."""
        total = RATE_MBPS[rate] * count
        cont = seed_containers(rate, count)
        cont = {k: n for k, n in cont.items() if n * RATE_MBPS[k] <= total}
        return cls(total, total, tuple(cont.items()))

    def container_count(self, kind: RateKind) -> Optional[int]:
        for k, n in self.containers:
            if k is kind:
                return n
        return None

    @property
    def utilization(self) -> float:
        if self.max_mbps == 0:
            return 0.0
        return float((self.max_mbps - self.available_mbps) / self.max_mbps)

    def _with_container(self, kind: RateKind, delta: int) -> Tuple[Tuple[RateKind, int], ...]:
        return tuple((k, n + delta if k is kind else n) for k, n in self.containers)


def capacity_feasible(pool: CapacityPool, rate: RateKind | LayerRate, capacity_mbps: Optional[Fraction | int] = None) -> bool:
    """True iff ``pool`` can carry one more request of ``rate``."""
    kind = rate.kind if isinstance(rate, LayerRate) else RateKind(rate) if isinstance(rate, str) else rate
    if not isinstance(kind, RateKind):
        raise ValidationError(f"unknown layer rate {rate!r}")
    need = demand_mbps(rate, capacity_mbps)
    if pool.available_mbps < need:
        return False
    count = pool.container_count(kind)
    return count is None or count >= 1


def consume(pool: CapacityPool, rate: RateKind | LayerRate, capacity_mbps: Optional[Fraction | int] = None) -> CapacityPool:
    """Return ``pool`` with one request of ``rate`` taken out."""
    if not capacity_feasible(pool, rate, capacity_mbps):
        raise CapacityError(f"pool cannot carry {rate}")
    kind = rate.kind if isinstance(rate, LayerRate) else RateKind(rate)
    need = demand_mbps(rate, capacity_mbps)
    containers = pool._with_container(kind, -1) if pool.container_count(kind) is not None else pool.containers
    return replace(pool, available_mbps=pool.available_mbps - need, containers=containers)


def restore(pool: CapacityPool, rate: RateKind | LayerRate, capacity_mbps: Optional[Fraction | int] = None) -> CapacityPool:
    """Inverse of :func:`consume`."""
    kind = rate.kind if isinstance(rate, LayerRate) else RateKind(rate)
    need = demand_mbps(rate, capacity_mbps)
    if pool.available_mbps + need > pool.max_mbps:
        raise ValidationError("restore would exceed pool maximum")
    count = pool.container_count(kind)
    containers = pool.containers
    if count is not None:
        if count + 1 > dict(pool.container_max)[kind]:
            raise ValidationError(f"restore would exceed {kind.value} container maximum")
        containers = pool._with_container(kind, +1)
    return replace(pool, available_mbps=pool.available_mbps + need, containers=containers)


def bottleneck_pool(pools: Iterable[CapacityPool]) -> CapacityPool:
    """Fresh pool sized to the smallest maximum among ``pools``."""
    pools = list(pools)
    if not pools:
        raise ValidationError("bottleneck of an empty pool list")
    size = min(p.max_mbps for p in pools)
    kinds = set.intersection(*(set(dict(p.container_max)) for p in pools))
    cont = {k: min(dict(p.container_max)[k] for p in pools) for k in kinds}
    cont = {k: n for k, n in cont.items() if n * RATE_MBPS[k] <= size}
    return CapacityPool(size, size, tuple(cont.items()))


# ---------------------------------------------------------------------------
# Static network description
# ---------------------------------------------------------------------------


@dataclass
class NetworkElement:
    """One piece of equipment and the tech/layer functions it supports.

    Attributes:
        id: Opaque identifier.
        location: Site name.
        supported: Tech/layer pairs hosted by the element.
        adaptations: Ordered (client, server) pairs the element can adapt.
    """

    id: str
    location: str
    supported: frozenset = field(default_factory=frozenset)
    adaptations: frozenset = field(default_factory=frozenset)

    def validate(self) -> None:
        for client, server in self.adaptations:
            if client not in self.supported or server not in self.supported:
                raise ValidationError(f"{self.id}: adaptation {client}->{server} uses an unsupported tech/layer")
            if client == server:
                raise ValidationError(f"{self.id}: adaptation endpoints must differ")


@dataclass
class Link:
    """A physical link between two elements at one tech/layer.

    Attributes:
        id: Opaque identifier.
        a: First element id.
        b: Second element id.
        tech_layer: Layer both ports operate at.
        rate: Bearer rate of one channel.
        channels: Number of parallel channels (WDM) carried.
        distance_km: Fibre length.
        srlg_ids: Shared risk groups the link belongs to.
    """

    id: str
    a: str
    b: str
    tech_layer: TechLayer
    rate: RateKind
    distance_km: float
    channels: int = 1
    srlg_ids: frozenset = field(default_factory=frozenset)

    def pool(self) -> CapacityPool:
        return CapacityPool.for_rate(self.rate, self.channels)


@dataclass
class InterTechLink:
    """A link joining a client port on one element to a server port on another.

    Attributes:
        id: Opaque identifier.
        client_ne: Element holding the client port.
        client_tl: Tech/layer of the client port.
        server_ne: Element holding the server port.
        server_tl: Tech/layer of the server port.
        distance_km: Patch length.
    """

    id: str
    client_ne: str
    client_tl: TechLayer
    server_ne: str
    server_tl: TechLayer
    distance_km: float = 0.0


class TopologyKind(str, enum.Enum):
    CORE_RING = "CORE_RING"
    RING_WITH_AGG = "RING_WITH_AGG"
    DUAL_HOMING = "DUAL_HOMING"
    MESH = "MESH"
    LINEAR_1P1 = "LINEAR_1P1"


@dataclass
class Topology:
    """A protection topology over a set of links.

    Attributes:
        id: Opaque identifier.
        kind: Topology kind.
        member_links: Ordered link ids. Rings list them around the cycle;
            dual homing lists them from the first aggregate to the second.
        aggregate_nodes: Element ids of the aggregates (0, 1 or 2 by kind).
    """

    id: str
    kind: TopologyKind
    member_links: List[str]
    aggregate_nodes: List[str] = field(default_factory=list)

    @property
    def represented(self) -> bool:
        """Whether the topology is represented by special edges."""
        return self.kind in (TopologyKind.CORE_RING, TopologyKind.RING_WITH_AGG, TopologyKind.DUAL_HOMING)


@dataclass
class Srlg:
    id: str
    member_links: frozenset = field(default_factory=frozenset)


def ring_order(topo: Topology, links: Mapping[str, Link]) -> List[str]:
    """Element ids around a ring, following ``member_links`` order.

    Raises:
        ValidationError: if the member links do not form one cycle.
    """
    members = [links[lid] for lid in topo.member_links]
    if len(members) < 2:
        raise ValidationError(f"topology {topo.id}: ring needs at least 2 links")
    first = members[0]
    # Orient the first link so that it continues into the second one.
    second = members[1]
    start, cur = (first.a, first.b) if first.b in (second.a, second.b) else (first.b, first.a)
    order = [start, cur]
    for link in members[1:]:
        if cur == link.a:
            cur = link.b
        elif cur == link.b:
            cur = link.a
        else:
            raise ValidationError(f"topology {topo.id}: links do not form a cycle")
        order.append(cur)
    if order[-1] != order[0] or len(set(order[:-1])) != len(order) - 1:
        raise ValidationError(f"topology {topo.id}: links do not form a single cycle")
    return order[:-1]


def chain_order(topo: Topology, links: Mapping[str, Link]) -> List[str]:
    """Element ids along a dual-homing chain from the first aggregate."""
    if len(topo.aggregate_nodes) != 2:
        raise ValidationError(f"topology {topo.id}: dual homing needs exactly 2 aggregates")
    cur = topo.aggregate_nodes[0]
    order = [cur]
    for lid in topo.member_links:
        link = links[lid]
        if cur == link.a:
            cur = link.b
        elif cur == link.b:
            cur = link.a
        else:
            raise ValidationError(f"topology {topo.id}: links do not form a path")
        order.append(cur)
    if cur != topo.aggregate_nodes[1] or len(set(order)) != len(order):
        raise ValidationError(f"topology {topo.id}: chain must be a simple path between the aggregates")
    return order


@dataclass
class Network:
    """Static network description handed to the graph builder."""

    elements: Dict[str, NetworkElement] = field(default_factory=dict)
    links: Dict[str, Link] = field(default_factory=dict)
    topologies: Dict[str, Topology] = field(default_factory=dict)
    srlgs: Dict[str, Srlg] = field(default_factory=dict)
    inter_tech_links: Dict[str, InterTechLink] = field(default_factory=dict)

    def add_element(self, ne: NetworkElement) -> NetworkElement:
        if ne.id in self.elements:
            raise ValidationError(f"duplicate element {ne.id}")
        self.elements[ne.id] = ne
        return ne

    def add_link(self, link: Link) -> Link:
        if link.id in self.links:
            raise ValidationError(f"duplicate link {link.id}")
        self.links[link.id] = link
        for sid in link.srlg_ids:
            srlg = self.srlgs.get(sid)
            members = srlg.member_links if srlg else frozenset()
            self.srlgs[sid] = Srlg(sid, members | {link.id})
        return link

    def add_topology(self, topo: Topology) -> Topology:
        if topo.id in self.topologies:
            raise ValidationError(f"duplicate topology {topo.id}")
        self.topologies[topo.id] = topo
        return topo

    def validate(self) -> None:
        """Check every network-model rule.

        Raises:
            ValidationError: on the first violated rule.
        """
        for ne in self.elements.values():
            ne.validate()
        for link in self.links.values():
            if link.distance_km < 0:
                raise ValidationError(f"link {link.id}: negative distance")
            if link.a == link.b:
                raise ValidationError(f"link {link.id}: endpoints must differ")
            if link.channels < 1:
                raise ValidationError(f"link {link.id}: needs at least one channel")
            for end in (link.a, link.b):
                ne = self.elements.get(end)
                if ne is None:
                    raise ValidationError(f"link {link.id}: unknown element {end}")
                if link.tech_layer not in ne.supported:
                    raise ValidationError(f"link {link.id}: {end} does not support {link.tech_layer}")
        for itl in self.inter_tech_links.values():
            for end, tl in ((itl.client_ne, itl.client_tl), (itl.server_ne, itl.server_tl)):
                ne = self.elements.get(end)
                if ne is None or tl not in ne.supported:
                    raise ValidationError(f"inter-tech link {itl.id}: {end} has no {tl} port")
        for srlg in self.srlgs.values():
            missing = [lid for lid in srlg.member_links if lid not in self.links]
            if missing:
                raise ValidationError(f"srlg {srlg.id}: unknown member links {sorted(missing)}")
        for topo in self.topologies.values():
            validate_topology(topo, self.links)


def validate_topology(topo: Topology, links: Mapping[str, Link]) -> None:
    """Check the structural rules of one topology."""
    unknown = [lid for lid in topo.member_links if lid not in links]
    if unknown:
        raise ValidationError(f"topology {topo.id}: unknown member links {unknown}")
    n_agg = len(topo.aggregate_nodes)
    if topo.kind is TopologyKind.CORE_RING:
        if n_agg != 0:
            raise ValidationError(f"topology {topo.id}: core ring takes no aggregate")
        if len(ring_order(topo, links)) < 3:
            raise ValidationError(f"topology {topo.id}: core ring needs at least 3 nodes")
    elif topo.kind is TopologyKind.RING_WITH_AGG:
        if n_agg != 1:
            raise ValidationError(f"topology {topo.id}: ring with aggregate needs exactly 1 aggregate")
        order = ring_order(topo, links)
        # Two-node rings closed by a pair of parallel links are allowed here.
        if topo.aggregate_nodes[0] not in order:
            raise ValidationError(f"topology {topo.id}: aggregate is not on the ring")
    elif topo.kind is TopologyKind.DUAL_HOMING:
        chain_order(topo, links)
    elif topo.kind is TopologyKind.LINEAR_1P1:
        if len(topo.member_links) != 1:
            raise ValidationError(f"topology {topo.id}: 1+1 topology wraps exactly one link")
    if len({links[lid].tech_layer for lid in topo.member_links}) > 1:
        raise ValidationError(f"topology {topo.id}: member links mix tech/layers")
