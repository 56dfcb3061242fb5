"""Deterministic generator for the hierarchical evaluation network.

The network has a national long-distance (NLD) WDM mesh, one metro per
NLD location, and a stack of ring structures hanging off each metro core:

* normal aggregate rings, each uplinked to a core node by a 1+1 link, with
  access rings subtended at every aggregate-ring node;
* dual-homing aggregate chains uplinked at both ends, with small access
  rings hanging off each chain node through a 1+1 link;
* "random" dual-homing rings whose two aggregates are existing elements
  picked at random, uplinked at both ends.

Rings alternate between SDH (STM-64 aggregates, STM-16 access) and
Ethernet (10GE aggregates, GE access). Element and link counts depend only
on :class:`GenParams`; the seed only moves placements and distances.
"""

from __future__ import annotations

import random
from dataclasses import asdict, dataclass, fields, replace
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

from .model import (
    Link,
    Network,
    NetworkElement,
    RateKind,
    TechLayer,
    Technology,
    Topology,
    TopologyKind,
    ValidationError,
)
from .provisioner import PathType, ServiceRequest

T = TechLayer
SDH_SERVICE = T(Technology.SDH, "SERVICE")
SDH_VC4 = T(Technology.SDH, "VC4")
SDH_MS = T(Technology.SDH, "MS")
PDH_SERVICE = T(Technology.PDH, "SERVICE")
ETH_SERVICE = T(Technology.ETH, "SERVICE")
ETH_LINK = T(Technology.ETH, "LINK")
MPLS_TUNNEL = T(Technology.MPLS_TP, "TUNNEL")
OTN_ODU = T(Technology.OTN, "ODU")
OTN_OTU = T(Technology.OTN, "OTU")
WDM_OCH = T(Technology.WDM, "OCH")

# (supported tech/layers, (client, server) adaptations) per element role.
PROFILES: Dict[str, Tuple[frozenset, frozenset]] = {
    "optical": (
        frozenset({WDM_OCH, OTN_OTU, OTN_ODU, SDH_MS, ETH_LINK}),
        frozenset({(OTN_OTU, WDM_OCH), (OTN_ODU, OTN_OTU), (SDH_MS, OTN_ODU), (ETH_LINK, OTN_ODU)}),
    ),
    "sdh": (
        frozenset({SDH_SERVICE, SDH_VC4, SDH_MS, PDH_SERVICE}),
        frozenset({(SDH_SERVICE, SDH_VC4), (PDH_SERVICE, SDH_VC4), (SDH_VC4, SDH_MS), (PDH_SERVICE, SDH_SERVICE)}),
    ),
    "eth": (
        frozenset({ETH_SERVICE, MPLS_TUNNEL, ETH_LINK}),
        frozenset({(ETH_SERVICE, MPLS_TUNNEL), (ETH_SERVICE, ETH_LINK), (MPLS_TUNNEL, ETH_LINK)}),
    ),
}

# Ring families: (profile, line tech/layer, aggregate rate, access rate).
FAMILIES = (
    ("sdh", SDH_MS, RateKind.STM64, RateKind.STM16),
    ("eth", ETH_LINK, RateKind.TENGE, RateKind.GE),
)

# Fifteen locations on a ring plus eight chords: 23 links.
NLD_15_CHORDS = ((0, 7), (1, 9), (2, 11), (3, 6), (4, 12), (5, 10), (8, 13), (9, 14))


@dataclass(frozen=True)
class GenParams:
    """Generator parameters.

    Defaults reproduce the calibrated full-size network; see
    :func:`calibrate_random_rings` for how ``random_agg_rings_per_location``
    was fixed.

    Attributes:
        nld_locations: Number of NLD locations (one metro each).
        nld_links: Number of NLD links.
        nld_channels: OTU-2 channels per NLD fibre.
        metro_core_nodes: Full-mesh metro core size.
        metro_channels: Channels per metro core fibre.
        agg_rings_per_location: Normal aggregate rings per metro.
        agg_ring_nodes: Elements per normal aggregate ring.
        access_rings_per_agg_node: Access rings subtended at each aggregate-ring element.
        access_ring_new_nodes: New elements per access ring (the host closes it).
        dh_rings_per_location: Dual-homing aggregate chains per metro.
        dh_ring_nodes: Elements per dual-homing chain, aggregates included.
        dh_access_per_node: Access rings hanging off each chain element.
        dh_access_nodes: Elements per dual-homing access ring.
        random_agg_rings_per_location: Random dual-homing rings per metro.
        random_ring_new_nodes: New elements per random ring.
        nld_km: NLD distance range.
        metro_km: Metro core and uplink distance range.
        ring_km: Ring distance range.
        seed: Placement and distance seed.
    """

    nld_locations: int = 15
    nld_links: int = 23
    nld_channels: int = 80
    metro_core_nodes: int = 4
    metro_channels: int = 40
    agg_rings_per_location: int = 2
    agg_ring_nodes: int = 2
    access_rings_per_agg_node: int = 11
    access_ring_new_nodes: int = 2
    dh_rings_per_location: int = 2
    dh_ring_nodes: int = 4
    dh_access_per_node: int = 2
    dh_access_nodes: int = 2
    random_agg_rings_per_location: int = 30
    random_ring_new_nodes: int = 2
    nld_km: Tuple[float, float] = (100.0, 800.0)
    metro_km: Tuple[float, float] = (5.0, 50.0)
    ring_km: Tuple[float, float] = (1.0, 10.0)
    seed: int = 0

    def __post_init__(self) -> None:
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, int) and not isinstance(v, bool) and v < 0:
                raise ValidationError(f"{f.name} must be non-negative")
        for name in ("nld_km", "metro_km", "ring_km"):
            lo, hi = getattr(self, name)
            object.__setattr__(self, name, (float(lo), float(hi)))
            if not 0 <= lo <= hi:
                raise ValidationError(f"{name} must be an ordered non-negative range")
        n = self.nld_locations
        if n < 1:
            raise ValidationError("need at least one location")
        if self.nld_links > n * (n - 1) // 2:
            raise ValidationError("more NLD links than location pairs")
        if n >= 3 and self.nld_links < n:
            raise ValidationError("NLD links must at least close the location ring")
        if self.metro_core_nodes < 1:
            raise ValidationError("metro core needs at least one node")
        if self.agg_rings_per_location and self.agg_ring_nodes < 2:
            raise ValidationError("aggregate rings need at least 2 nodes")
        if self.access_rings_per_agg_node and self.access_ring_new_nodes < 1:
            raise ValidationError("access rings need at least one new node")
        if self.dh_rings_per_location and self.dh_ring_nodes < 3:
            raise ValidationError("dual-homing chains need at least 3 nodes")
        if self.dh_access_per_node and self.dh_access_nodes < 2:
            raise ValidationError("dual-homing access rings need at least 2 nodes")
        if self.random_agg_rings_per_location and self.random_ring_new_nodes < 1:
            raise ValidationError("random rings need at least one new node")

    @classmethod
    def desk_scale(cls, **overrides) -> "GenParams":
        """Three-location network with the default metro composition."""
        base = dict(nld_locations=3, nld_links=3)
        base.update(overrides)
        return cls(**base)

    def to_dict(self) -> dict:
        d = asdict(self)
        for k in ("nld_km", "metro_km", "ring_km"):
            d[k] = list(d[k])
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "GenParams":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValidationError(f"unknown generator parameters {sorted(unknown)}")
        data = dict(data)
        for k in ("nld_km", "metro_km", "ring_km"):
            if k in data:
                data[k] = tuple(data[k])
        return cls(**data)


def nld_adjacency(n: int, links: int) -> List[Tuple[int, int]]:
    """Fixed NLD adjacency: a ring plus chords."""
    if n == 15 and links == 23:
        pairs = [(i, (i + 1) % n) for i in range(n)] + list(NLD_15_CHORDS)
        return [tuple(sorted(p)) for p in pairs]
    pairs: List[Tuple[int, int]] = []
    if n == 2 and links:
        pairs.append((0, 1))
    elif n >= 3:
        pairs = [tuple(sorted((i, (i + 1) % n))) for i in range(n)]
    seen = set(pairs)
    for step in range(n // 2, 1, -1):
        for i in range(n):
            if len(pairs) >= links:
                return pairs
            p = tuple(sorted((i, (i + step) % n)))
            if p[0] != p[1] and p not in seen:
                seen.add(p)
                pairs.append(p)
    return pairs[:links]


class _Builder:
    def __init__(self, params: GenParams) -> None:
        self.p = params
        self.rng = random.Random(params.seed)
        self.net = Network()
        self.link_seq = 0
        self.topo_seq = 0

    def element(self, ne_id: str, location: str, profile: str) -> str:
        supported, adaptations = PROFILES[profile]
        self.net.add_element(NetworkElement(ne_id, location, supported, adaptations))
        return ne_id

    def distance(self, rng_range: Tuple[float, float]) -> float:
        lo, hi = rng_range
        return round(self.rng.uniform(lo, hi), 3)

    def link(self, a: str, b: str, tl: TechLayer, rate: RateKind, km: Tuple[float, float], channels: int = 1) -> str:
        self.link_seq += 1
        lid = f"K{self.link_seq:06d}"
        span = "|".join(sorted((a, b)))
        self.net.add_link(
            Link(lid, a, b, tl, rate, self.distance(km), channels=channels, srlg_ids=frozenset({f"SRLG:{span}"}))
        )
        return lid

    def topology(self, kind: TopologyKind, links: List[str], aggregates: Sequence[str] = ()) -> str:
        self.topo_seq += 1
        tid = f"T{self.topo_seq:05d}"
        self.net.add_topology(Topology(tid, kind, list(links), list(aggregates)))
        return tid

    def protected_link(self, a: str, b: str, tl: TechLayer, rate: RateKind, km) -> str:
        lid = self.link(a, b, tl, rate, km)
        self.topology(TopologyKind.LINEAR_1P1, [lid])
        return lid

    def ring(self, nodes: List[str], tl: TechLayer, rate: RateKind, aggregate: Optional[str]) -> str:
        links = [self.link(nodes[i], nodes[(i + 1) % len(nodes)], tl, rate, self.p.ring_km) for i in range(len(nodes))]
        kind = TopologyKind.CORE_RING if aggregate is None else TopologyKind.RING_WITH_AGG
        return self.topology(kind, links, [aggregate] if aggregate else [])

    def chain(self, nodes: List[str], tl: TechLayer, rate: RateKind) -> str:
        links = [self.link(nodes[i], nodes[i + 1], tl, rate, self.p.ring_km) for i in range(len(nodes) - 1)]
        return self.topology(TopologyKind.DUAL_HOMING, links, [nodes[0], nodes[-1]])


def generate(params: Optional[GenParams] = None) -> Network:
    """Generate the network described by ``params``.

    Returns:
        A validated :class:`~mlpce.model.Network`.
    """
    p = params or GenParams()
    b = _Builder(p)
    nld = [b.element(f"L{loc:02d}-NLD", f"L{loc:02d}", "optical") for loc in range(p.nld_locations)]
    nld_links = []
    for i, j in nld_adjacency(p.nld_locations, p.nld_links):
        nld_links.append(b.link(nld[i], nld[j], WDM_OCH, RateKind.OCH, p.nld_km, channels=p.nld_channels))
    if nld_links:
        b.topology(TopologyKind.MESH, nld_links)

    for loc in range(p.nld_locations):
        _metro(b, loc, nld[loc])

    b.net.validate()
    return b.net


def _metro(b: _Builder, loc: int, nld_ne: str) -> None:
    p = b.p
    site = f"L{loc:02d}"
    cores = [b.element(f"{site}-C{k}", site, "optical") for k in range(p.metro_core_nodes)]
    mesh = [
        b.link(cores[i], cores[j], WDM_OCH, RateKind.OCH, p.metro_km, channels=p.metro_channels)
        for i in range(len(cores))
        for j in range(i + 1, len(cores))
    ]
    if mesh:
        b.topology(TopologyKind.MESH, mesh)
    for _, line, agg_rate, _ in FAMILIES:
        b.protected_link(nld_ne, cores[0], line, agg_rate, p.metro_km)

    counter = {"n": 0}
    family_members: Dict[str, List[str]] = {"sdh": [], "eth": []}

    def new_ne(profile: str) -> str:
        counter["n"] += 1
        ne = b.element(f"{site}-E{counter['n']:04d}", site, profile)
        family_members[profile].append(ne)
        return ne

    def uplink(ne: str, line: TechLayer, rate: RateKind) -> None:
        b.protected_link(ne, b.rng.choice(cores), line, rate, p.metro_km)

    for r in range(p.agg_rings_per_location):
        profile, line, agg_rate, acc_rate = FAMILIES[r % 2]
        members = [new_ne(profile) for _ in range(p.agg_ring_nodes)]
        b.ring(members, line, agg_rate, aggregate=members[0])
        uplink(members[0], line, agg_rate)
        for host in members:
            for _ in range(p.access_rings_per_agg_node):
                ring = [host] + [new_ne(profile) for _ in range(p.access_ring_new_nodes)]
                b.ring(ring, line, acc_rate, aggregate=host)

    for r in range(p.dh_rings_per_location):
        profile, line, agg_rate, acc_rate = FAMILIES[r % 2]
        members = [new_ne(profile) for _ in range(p.dh_ring_nodes)]
        b.chain(members, line, agg_rate)
        uplink(members[0], line, agg_rate)
        uplink(members[-1], line, agg_rate)
        for host in members:
            for _ in range(p.dh_access_per_node):
                ring = [new_ne(profile) for _ in range(p.dh_access_nodes)]
                b.ring(ring, line, acc_rate, aggregate=ring[0])
                b.protected_link(ring[0], host, line, acc_rate, p.ring_km)

    for r in range(p.random_agg_rings_per_location):
        profile, line, agg_rate, _ = FAMILIES[r % 2]
        pool = list(family_members[profile])
        if len(pool) >= 2:
            a, z = b.rng.sample(pool, 2)
        else:
            a = new_ne(profile) if not pool else pool[0]
            z = new_ne(profile)
        middle = [new_ne(profile) for _ in range(p.random_ring_new_nodes)]
        b.chain([a] + middle + [z], line, agg_rate)
        uplink(a, line, agg_rate)
        uplink(z, line, agg_rate)


# ---------------------------------------------------------------------------
# Counting and calibration
# ---------------------------------------------------------------------------


def expected_counts(params: GenParams) -> Dict[str, int]:
    """Closed-form element, node and edge counts for ``params``.

    Assumes random rings find two existing elements of their family, which
    holds whenever any other structure of that family exists.
    """
    p = params
    n_nld = p.nld_locations
    per = {"ne": 0, "nodes": 0, "adapt": 0, "phys": 0, "special": 0, "hubs": 0}
    size = {k: len(v[0]) for k, v in PROFILES.items()}
    adapt = {k: len(v[1]) for k, v in PROFILES.items()}

    def add_ne(profile: str, count: int) -> None:
        per["ne"] += count
        per["nodes"] += size[profile] * count
        per["adapt"] += adapt[profile] * count

    add_ne("optical", p.metro_core_nodes)
    per["phys"] += p.metro_core_nodes * (p.metro_core_nodes - 1) // 2 + len(FAMILIES)
    for r in range(p.agg_rings_per_location):
        fam = FAMILIES[r % 2][0]
        k = p.agg_ring_nodes
        add_ne(fam, k)
        per["phys"] += k + 1
        per["special"] += k - 1
        acc = k * p.access_rings_per_agg_node
        add_ne(fam, acc * p.access_ring_new_nodes)
        per["phys"] += acc * (p.access_ring_new_nodes + 1)
        per["special"] += acc * p.access_ring_new_nodes
    for r in range(p.dh_rings_per_location):
        fam = FAMILIES[r % 2][0]
        k = p.dh_ring_nodes
        add_ne(fam, k)
        per["phys"] += (k - 1) + 2
        per["special"] += (k - 2) + 2
        per["hubs"] += 1
        acc = k * p.dh_access_per_node
        add_ne(fam, acc * p.dh_access_nodes)
        per["phys"] += acc * (p.dh_access_nodes + 1)
        per["special"] += acc * (p.dh_access_nodes - 1)
    for r in range(p.random_agg_rings_per_location):
        fam = FAMILIES[r % 2][0]
        m = p.random_ring_new_nodes
        add_ne(fam, m)
        per["phys"] += (m + 1) + 2
        per["special"] += m + 2
        per["hubs"] += 1
    out = {
        "network_elements": n_nld + n_nld * per["ne"],
        "tech_layer_nodes": n_nld * size["optical"] + n_nld * per["nodes"],
        "hub_nodes": n_nld * per["hubs"],
        "adaptation_edges": n_nld * adapt["optical"] + n_nld * per["adapt"],
        "physical_links": len(nld_adjacency(n_nld, p.nld_links)) + n_nld * per["phys"],
        "special_edges": n_nld * per["special"],
    }
    out["edges"] = out["adaptation_edges"] + out["physical_links"] + out["special_edges"]
    return out


def calibrate_random_rings(target_elements: int = 2955, params: Optional[GenParams] = None) -> int:
    """Random rings per location that make the element count hit ``target_elements``.

    Raises:
        ValidationError: if no non-negative integer hits the target exactly.
    """
    base = replace(params or GenParams(), random_agg_rings_per_location=0)
    n0 = expected_counts(base)["network_elements"]
    per_ring = base.nld_locations * base.random_ring_new_nodes
    gap = target_elements - n0
    if gap < 0 or gap % per_ring:
        raise ValidationError(f"cannot reach {target_elements} elements (base {n0}, step {per_ring})")
    return gap // per_ring


# ---------------------------------------------------------------------------
# Requests
# ---------------------------------------------------------------------------

REQUEST_RATES = (RateKind.VC12, RateKind.VC3, RateKind.VC4, RateKind.ETH_BW)


def generate_requests(
    network: Network,
    n: int = 500,
    seed: int = 0,
    path_type: PathType = PathType.LPP,
    max_eth_mbps: int = 200,
) -> List[ServiceRequest]:
    """Random protected requests between distinct service-capable elements.

    The rate is drawn uniformly from VC12, VC3, VC4 and ETH_BW; ETH_BW asks
    for a uniform integer bandwidth in ``[1, max_eth_mbps]``. Endpoints are
    drawn uniformly among elements offering the rate's service layer.
    """
    if n < 0:
        raise ValidationError("request count must be non-negative")
    rng = random.Random(seed)
    sdh = sorted(ne.id for ne in network.elements.values() if SDH_SERVICE in ne.supported)
    eth = sorted(ne.id for ne in network.elements.values() if ETH_SERVICE in ne.supported)
    out: List[ServiceRequest] = []
    for i in range(n):
        rate = rng.choice(REQUEST_RATES)
        pool = eth if rate is RateKind.ETH_BW else sdh
        if len(pool) < 2:
            raise ValidationError(f"fewer than two elements can terminate {rate.value}")
        src, dst = rng.sample(pool, 2)
        cap = Fraction(rng.randint(1, max_eth_mbps)) if rate is RateKind.ETH_BW else Fraction(0)
        out.append(ServiceRequest(f"R{i:05d}", src, dst, path_type, 1, rate, cap))
    return out
