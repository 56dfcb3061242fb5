"""Topology and request files.

Topologies are JSON documents tagged with a format name and version.
Requests are JSON Lines, one request per line. Capacities are written as
exact rational strings (``"3/2"``) or integers.
"""

from __future__ import annotations

import json
from fractions import Fraction
from pathlib import Path as FsPath
from typing import Iterable, List, Union

from .model import (
    InterTechLink,
    Link,
    Network,
    NetworkElement,
    RateKind,
    TechLayer,
    Topology,
    TopologyKind,
    ValidationError,
)
from .provisioner import PathType, ServiceRequest

FORMAT_NAME = "mlpce-topology"
FORMAT_VERSION = 1

PathLike = Union[str, FsPath]


def _frac(value: Fraction) -> Union[int, str]:
    value = Fraction(value)
    return value.numerator if value.denominator == 1 else f"{value.numerator}/{value.denominator}"


def network_to_dict(network: Network) -> dict:
    """Plain-data form of ``network`` with deterministic ordering."""
    return {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "elements": [
            {
                "id": ne.id,
                "location": ne.location,
                "supported": sorted(tl.key() for tl in ne.supported),
                "adaptations": sorted([c.key(), s.key()] for c, s in ne.adaptations),
            }
            for ne in sorted(network.elements.values(), key=lambda e: e.id)
        ],
        "links": [
            {
                "id": link.id,
                "endpoints": [
                    {"ne": link.a, "port": link.tech_layer.key()},
                    {"ne": link.b, "port": link.tech_layer.key()},
                ],
                "tech_layer": link.tech_layer.key(),
                "rate": link.rate.value,
                "channels": link.channels,
                "distance_km": link.distance_km,
                "srlg_ids": sorted(link.srlg_ids),
            }
            for link in sorted(network.links.values(), key=lambda l: l.id)
        ],
        "topologies": [
            {
                "id": t.id,
                "kind": t.kind.value,
                "member_links": list(t.member_links),
                "aggregate_nodes": list(t.aggregate_nodes),
            }
            for t in sorted(network.topologies.values(), key=lambda t: t.id)
        ],
        "inter_tech_links": [
            {
                "id": x.id,
                "client": {"ne": x.client_ne, "port": x.client_tl.key()},
                "server": {"ne": x.server_ne, "port": x.server_tl.key()},
                "distance_km": x.distance_km,
            }
            for x in sorted(network.inter_tech_links.values(), key=lambda x: x.id)
        ],
    }


def network_from_dict(data: dict) -> Network:
    """Inverse of :func:`network_to_dict`; validates the result.

    Raises:
        ValidationError: on a wrong format tag, unknown version or bad content.
    """
    if data.get("format") != FORMAT_NAME:
        raise ValidationError(f"not a {FORMAT_NAME} document")
    if data.get("version") != FORMAT_VERSION:
        raise ValidationError(f"unsupported topology format version {data.get('version')!r}")
    net = Network()
    try:
        for e in data["elements"]:
            net.add_element(
                NetworkElement(
                    e["id"],
                    e["location"],
                    frozenset(TechLayer.parse(s) for s in e["supported"]),
                    frozenset((TechLayer.parse(c), TechLayer.parse(s)) for c, s in e["adaptations"]),
                )
            )
        for l in data["links"]:
            a, b = l["endpoints"]
            tl = TechLayer.parse(l["tech_layer"])
            if TechLayer.parse(a["port"]) != tl or TechLayer.parse(b["port"]) != tl:
                raise ValidationError(f"link {l['id']}: port layers differ from the link layer")
            net.add_link(
                Link(
                    l["id"],
                    a["ne"],
                    b["ne"],
                    tl,
                    RateKind(l["rate"]),
                    float(l["distance_km"]),
                    int(l.get("channels", 1)),
                    frozenset(l.get("srlg_ids", ())),
                )
            )
        for t in data.get("topologies", ()):
            net.add_topology(Topology(t["id"], TopologyKind(t["kind"]), list(t["member_links"]), list(t.get("aggregate_nodes", ()))))
        for x in data.get("inter_tech_links", ()):
            net.inter_tech_links[x["id"]] = InterTechLink(
                x["id"],
                x["client"]["ne"],
                TechLayer.parse(x["client"]["port"]),
                x["server"]["ne"],
                TechLayer.parse(x["server"]["port"]),
                float(x.get("distance_km", 0.0)),
            )
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ValidationError):
            raise
        raise ValidationError(f"malformed topology document: {exc!r}") from exc
    net.validate()
    return net


def save_network(network: Network, path: PathLike) -> None:
    text = json.dumps(network_to_dict(network), indent=1, sort_keys=False)
    FsPath(path).write_text(text + "\n", encoding="utf-8")


def load_network(path: PathLike) -> Network:
    with open(path, encoding="utf-8") as fh:
        return network_from_dict(json.load(fh))


def request_to_dict(r: ServiceRequest) -> dict:
    return {
        "id": r.id,
        "src_ne": r.src_ne,
        "dst_ne": r.dst_ne,
        "path_type": r.path_type.value,
        "N": r.N,
        "layer_rate": r.layer_rate.value,
        "capacity_mbps": _frac(r.capacity_mbps),
    }


def request_from_dict(d: dict) -> ServiceRequest:
    try:
        return ServiceRequest(
            str(d["id"]),
            d["src_ne"],
            d["dst_ne"],
            PathType(d.get("path_type", PathType.LPP.value)),
            int(d.get("N", 1)),
            RateKind(d["layer_rate"]),
            Fraction(str(d.get("capacity_mbps", 0))),
        )
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ValidationError):
            raise
        raise ValidationError(f"malformed request {d!r}: {exc}") from exc


def save_requests(requests: Iterable[ServiceRequest], path: PathLike) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in requests:
            fh.write(json.dumps(request_to_dict(r)) + "\n")


def load_requests(path: PathLike) -> List[ServiceRequest]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(request_from_dict(json.loads(line)))
    return out
