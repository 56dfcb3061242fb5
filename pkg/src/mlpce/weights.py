"""Initial and dynamic edge weights.

Initial weights blend normalised distance and inverse bandwidth for
physical links, and discount the summed weight of the constituents for
logical links and special edges. Dynamic weights grow with utilisation
under one of three schemes:

* ``PLF``: piecewise linear, with multipliers 1, 2, 5 and 10 on the initial
  weight above utilisation thresholds 1/3, 2/3 and 9/10, plus a term
  proportional to utilisation.
* ``LF``: normalised distance plus the negative log of the free ratio.
* ``WGM``: weighted geometric mean of scaled distance and utilisation.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from typing import TYPE_CHECKING, Sequence

import numpy as np

if TYPE_CHECKING:
    from .graph import AuxGraph


class Scheme(str, enum.Enum):
    PLF = "PLF"
    LF = "LF"
    WGM = "WGM"


class ParameterError(ValueError):
    """Raised for out-of-range weight parameters or inputs."""


ADAPTATION_WEIGHT = 1e-6
PLF_THRESHOLDS = (1.0 / 3.0, 2.0 / 3.0, 0.9)
PLF_MULTIPLIERS = (1.0, 2.0, 5.0, 10.0)


@dataclass(frozen=True)
class WeightParams:
    """Weighting parameters.

    Attributes:
        alpha: Distance share, in [0, 1].
        beta: Bandwidth/utilisation share; must equal ``1 - alpha``.
        gamma: Logical-link discount, in (0, 1).
        eta: Special-edge discount, in (0, 1).
        d_max: Distance normaliser in km.
        b_max: Bandwidth normaliser in Mbps.
        scheme: Dynamic weighting scheme.
        lf_normalize_distance: Use ``d/d_max`` rather than raw km in LF.
        wgm_scale: Multiplier applied to ``d/d_max`` inside WGM.
        wgm_d_min: Distance floor in km for WGM.
        epsilon: Constant weight of adaptation edges.
    """

    alpha: float = 0.5
    beta: float | None = None
    gamma: float = 0.7
    eta: float = 0.7
    d_max: float = 1.0
    b_max: float = 1.0
    scheme: Scheme = Scheme.PLF
    lf_normalize_distance: bool = True
    wgm_scale: float = 100.0
    wgm_d_min: float = 0.1
    epsilon: float = ADAPTATION_WEIGHT

    def __post_init__(self) -> None:
        if self.beta is None:
            object.__setattr__(self, "beta", 1.0 - self.alpha)
        object.__setattr__(self, "scheme", Scheme(self.scheme))
        if not 0.0 <= self.alpha <= 1.0 or not 0.0 <= self.beta <= 1.0:
            raise ParameterError("alpha and beta must lie in [0, 1]")
        if abs(self.alpha + self.beta - 1.0) > 1e-12:
            raise ParameterError("alpha + beta must equal 1")
        if not 0.0 < self.gamma < 1.0 or not 0.0 < self.eta < 1.0:
            raise ParameterError("gamma and eta must lie in (0, 1)")
        if self.d_max <= 0 or self.b_max <= 0:
            raise ParameterError("d_max and b_max must be positive")
        if self.wgm_scale <= 0 or self.wgm_d_min <= 0:
            raise ParameterError("wgm_scale and wgm_d_min must be positive")

    def with_normalizers(self, d_max: float, b_max: float) -> "WeightParams":
        return replace(self, d_max=max(float(d_max), 1e-9), b_max=max(float(b_max), 1e-9))


def initial_physical_weight(d: float, b: float, p: WeightParams) -> float:
    """Weight of a physical link from distance ``d`` and bandwidth ``b``."""
    if d < 0 or d > p.d_max:
        raise ParameterError(f"distance {d} outside [0, d_max={p.d_max}]")
    if b <= 0 or b > p.b_max:
        raise ParameterError(f"bandwidth {b} outside (0, b_max={p.b_max}]")
    return p.alpha * d / p.d_max + p.beta * (1.0 - b / p.b_max)


def initial_logical_weight(underlying_weights: Sequence[float], p: WeightParams) -> float:
    if not underlying_weights:
        raise ParameterError("logical link needs at least one underlying weight")
    if any(w < 0 for w in underlying_weights):
        raise ParameterError("underlying weights must be non-negative")
    return p.gamma * math.fsum(underlying_weights)


def initial_special_edge_weight(member_weights: Sequence[float], p: WeightParams) -> float:
    """Weight shared by every special edge of one topology."""
    if not member_weights:
        raise ParameterError("special edge needs at least one member weight")
    if any(w < 0 for w in member_weights):
        raise ParameterError("member weights must be non-negative")
    return p.eta * math.fsum(member_weights)


def hub_leg_weight() -> float:
    return 0.0


def _check_rho(rho: float) -> None:
    if not 0.0 <= rho <= 1.0 or math.isnan(rho):
        raise ParameterError(f"utilisation {rho} outside [0, 1]")


def plf_weight(w_i: float, rho: float) -> float:
    _check_rho(rho)
    w_prop = w_i * rho
    t1, t2, t3 = PLF_THRESHOLDS
    if rho <= t1:
        mult = PLF_MULTIPLIERS[0]
    elif rho <= t2:
        mult = PLF_MULTIPLIERS[1]
    elif rho <= t3:
        mult = PLF_MULTIPLIERS[2]
    else:
        mult = PLF_MULTIPLIERS[3]
    return mult * w_i + w_prop


def lf_weight(w_i: float, rho: float, d: float, p: WeightParams) -> float:
    _check_rho(rho)
    if rho == 0.0:
        return w_i
    if rho >= 1.0:
        return math.inf
    dist = d / p.d_max if p.lf_normalize_distance else d
    return p.alpha * dist - p.beta * math.log(1.0 - rho)


def wgm_weight(w_i: float, rho: float, d: float, p: WeightParams) -> float:
    _check_rho(rho)
    if p.alpha == 0.0 and rho == 0.0:
        return 1.0
    if rho == 0.0:
        return w_i
    dist = max(d, p.wgm_d_min) / p.d_max * p.wgm_scale
    return math.exp(p.alpha * math.log(dist) + p.beta * math.log(rho))


def dynamic_weight(w_i: float, rho: float, d: float, p: WeightParams) -> float:
    """Dynamic weight of one edge under ``p.scheme``.

    Args:
        w_i: Initial weight of the edge.
        rho: Utilisation of the edge's own pool, in [0, 1].
        d: Edge distance in km.
        p: Weight parameters.
    """
    if p.scheme is Scheme.PLF:
        return plf_weight(w_i, rho)
    if p.scheme is Scheme.LF:
        return lf_weight(w_i, rho, d, p)
    return wgm_weight(w_i, rho, d, p)


def dynamic_weights(w_i: np.ndarray, rho: np.ndarray, d: np.ndarray, p: WeightParams) -> np.ndarray:
    """Vectorised :func:`dynamic_weight` over edge arrays."""
    w_i = np.asarray(w_i, dtype=np.float64)
    rho = np.asarray(rho, dtype=np.float64)
    d = np.asarray(d, dtype=np.float64)
    if rho.size and (np.nanmin(rho) < 0.0 or np.nanmax(rho) > 1.0 or np.isnan(rho).any()):
        raise ParameterError("utilisation outside [0, 1]")
    if p.scheme is Scheme.PLF:
        t1, t2, t3 = PLF_THRESHOLDS
        mult = np.select([rho <= t1, rho <= t2, rho <= t3], PLF_MULTIPLIERS[:3], PLF_MULTIPLIERS[3])
        return mult * w_i + w_i * rho
    zero = rho == 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        if p.scheme is Scheme.LF:
            dist = d / p.d_max if p.lf_normalize_distance else d
            out = p.alpha * dist - p.beta * np.log(1.0 - rho)
            out = np.where(rho >= 1.0, np.inf, out)
            out = np.where(zero, w_i, out)
            return out + 0.0
        dist = np.maximum(d, p.wgm_d_min) / p.d_max * p.wgm_scale
        safe_rho = np.where(zero, 1.0, rho)
        out = np.exp(p.alpha * np.log(dist) + p.beta * np.log(safe_rho))
    if p.alpha == 0.0:
        return np.where(zero, 1.0, out)
    return np.where(zero, w_i, out)


def normalizers(graph: "AuxGraph") -> tuple[float, float]:
    """``(d_max, b_max)`` over the physical links of ``graph``."""
    from .graph import EdgeKind

    d_max = 0.0
    b_max = 0.0
    for edge in graph.edges:
        if edge.kind is EdgeKind.PHYSICAL:
            d_max = max(d_max, edge.distance_km)
            b_max = max(b_max, float(edge.pool.max_mbps))
    return (d_max if d_max > 0 else 1.0, b_max if b_max > 0 else 1.0)


def assign_initial_weights(graph: "AuxGraph", p: WeightParams) -> WeightParams:
    """Recompute every initial weight of ``graph`` in dependency order.

    Normalisers are taken from the graph's physical links. Returns the
    parameters with those normalisers filled in.
    """
    from .graph import EdgeKind

    p = p.with_normalizers(*normalizers(graph))
    weights: dict[str, float] = {}
    deferred = []
    for edge in graph.edges:
        if edge.kind is EdgeKind.ADAPTATION:
            weights[edge.id] = p.epsilon
        elif edge.kind is EdgeKind.PHYSICAL:
            weights[edge.id] = initial_physical_weight(edge.distance_km, float(edge.pool.max_mbps), p)
        elif edge.kind is EdgeKind.DH_HUB_LEG:
            weights[edge.id] = hub_leg_weight()
        else:
            deferred.append(edge)
    # Specials sum member links; logical links may nest, and always come after
    # their underlying edges in insertion order.
    for edge in deferred:
        if edge.kind is EdgeKind.LOGICAL:
            weights[edge.id] = initial_logical_weight([weights[e] for e in edge.underlying_path], p)
        else:
            members = graph.topology_links[edge.topology_id]
            weights[edge.id] = initial_special_edge_weight([weights[e] for e in members], p)
    for edge in graph.edges:
        graph.set_initial_weight(edge.id, weights[edge.id])
    return p
