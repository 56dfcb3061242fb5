"""Parameter sweep, metrics and the combined performance score."""

from __future__ import annotations

import csv
import io as _io
import logging
import math
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from fractions import Fraction
from statistics import fmean
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from ._kernels import warmup
from .graph import LOGICAL_ID_PREFIX, AuxGraph, EdgeKind, build_auxiliary_graph
from .model import Network, ValidationError
from .netgen import generate_requests
from .paths import DEFAULT_MAX_DEPTH
from .provisioner import BEARER_KINDS, PathType, Provisioner, ServiceRequest
from .weights import Scheme, WeightParams

logger = logging.getLogger(__name__)

CSV_HEADER = (
    "scheme",
    "alpha",
    "gamma",
    "eta",
    "seed",
    "R_mbps",
    "B_mbps",
    "L_count",
    "U_weighted",
    "val",
    "avg_ms_unprot",
    "avg_ms_lpp",
)
EXTENDED_HEADER = CSV_HEADER + ("B_service_mbps", "accepted", "rejected", "val_B", "val_L", "val_U")

UTILIZATION_BUCKETS = (Fraction(1, 4), Fraction(1, 2), Fraction(3, 4))


def _grid(start: float, stop: float, step: float) -> Tuple[float, ...]:
    n = int(round((stop - start) / step))
    return tuple(round(start + i * step, 10) for i in range(n + 1))


@dataclass(frozen=True)
class SweepConfig:
    """What to sweep and how.

    Attributes:
        alphas: Distance-share grid.
        gammas: Logical-link discount grid.
        etas: Special-edge discount grid.
        schemes: Dynamic weighting schemes.
        seeds: Request-list seeds; each seed is an independent replicate.
        n_requests: Requests per seed.
        n_candidates: Candidate paths per request; the first one is provisioned.
        max_depth: Adaptation stack depth limit.
        timing_sample: Requests per cell also timed as unprotected queries.
        timing: Record runtimes; disable for byte-identical output.
        workers: Worker processes for independent cells.
    """

    alphas: Tuple[float, ...] = _grid(0.0, 1.0, 0.1)
    gammas: Tuple[float, ...] = (0.5, 0.7, 0.9)
    etas: Tuple[float, ...] = (0.5, 0.7, 0.9)
    schemes: Tuple[Scheme, ...] = (Scheme.PLF, Scheme.LF, Scheme.WGM)
    seeds: Tuple[int, ...] = (0,)
    n_requests: int = 500
    n_candidates: int = 1
    max_depth: int = DEFAULT_MAX_DEPTH
    timing_sample: int = 20
    timing: bool = True
    workers: int = 1

    def __post_init__(self) -> None:
        for name in ("alphas", "gammas", "etas", "seeds"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        object.__setattr__(self, "schemes", tuple(s if isinstance(s, Scheme) else Scheme(str(s).upper()) for s in self.schemes))
        for name in ("alphas", "gammas", "etas", "schemes", "seeds"):
            if not getattr(self, name):
                raise ValidationError(f"{name} grid is empty")
        for a in self.alphas:
            for g in self.gammas:
                for e in self.etas:
                    WeightParams(alpha=a, gamma=g, eta=e)
        if self.n_requests < 0 or self.n_candidates < 1 or self.timing_sample < 0 or self.workers < 1:
            raise ValidationError("request count, candidates, timing sample and workers must be sensible")

    @property
    def n_cells(self) -> int:
        return len(self.schemes) * len(self.alphas) * len(self.gammas) * len(self.etas) * len(self.seeds)

    def cells(self) -> List[Tuple[int, Scheme, float, float, float]]:
        """Cells in output order: seed, scheme, alpha, gamma, eta."""
        return [
            (seed, s, a, g, e)
            for seed in self.seeds
            for s in self.schemes
            for a in self.alphas
            for g in self.gammas
            for e in self.etas
        ]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["schemes"] = [s.value for s in self.schemes]
        for k in ("alphas", "gammas", "etas", "seeds"):
            d[k] = list(d[k])
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "SweepConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValidationError(f"unknown sweep settings {sorted(unknown)}")
        return cls(**data)


@dataclass
class RunMetrics:
    """Metrics of one cell.

    Attributes:
        R: Accepted demand in Mbps.
        B: Capacity consumed on physical and logical links, protection and
            logical-link reservations included.
        L: Logical links created.
        U: Weighted link utilisation.
        val: Combined score; ``None`` until scored or when ``R == 0``.
        B_service: Demand charged for services only.
        accepted: Accepted requests.
        rejected: Rejected requests.
        avg_ms_unprot: Mean unprotected query time.
        avg_ms_lpp: Mean protected request time, provisioning included.
        terms: The B, L and U contributions to ``val``.
    """

    R: Fraction = Fraction(0)
    B: Fraction = Fraction(0)
    L: int = 0
    U: int = 0
    val: Optional[float] = None
    B_service: Fraction = Fraction(0)
    accepted: int = 0
    rejected: int = 0
    avg_ms_unprot: Optional[float] = None
    avg_ms_lpp: Optional[float] = None
    terms: Tuple[float, float, float] = (0.0, 0.0, 0.0)


@dataclass
class CellResult:
    seed: int
    scheme: Scheme
    alpha: float
    gamma: float
    eta: float
    metrics: RunMetrics = field(default_factory=RunMetrics)

    @property
    def key(self) -> Tuple[str, float, float, float]:
        return (self.scheme.value, self.alpha, self.gamma, self.eta)


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------


def _bearer_edges(graph: AuxGraph):
    return [e for e in graph.edges if e.kind in BEARER_KINDS and e.pool is not None]


def weighted_link_utilization(graph: AuxGraph) -> int:
    """Links weighted 1 to 4 by utilisation quartile; idle links count 1."""
    total = 0
    for edge in _bearer_edges(graph):
        pool = edge.pool
        rho = (pool.max_mbps - pool.available_mbps) / pool.max_mbps
        total += 1 + sum(1 for t in UTILIZATION_BUCKETS if rho > t)
    return total


def total_capacity_consumed(graph: AuxGraph) -> Fraction:
    return sum((e.pool.max_mbps - e.pool.available_mbps for e in _bearer_edges(graph)), Fraction(0))


def logical_links_created(graph: AuxGraph) -> int:
    return sum(1 for e in graph.edges if e.kind is EdgeKind.LOGICAL and e.id.startswith(LOGICAL_ID_PREFIX))


def snapshot_metrics(graph: AuxGraph) -> Tuple[Fraction, int, int]:
    """``(B, L, U)`` of a graph snapshot."""
    return total_capacity_consumed(graph), logical_links_created(graph), weighted_link_utilization(graph)


def _term(x: float, x_max: float, r: float) -> float:
    if x == 0:
        return 0.0
    return (x / r) * (1.0 + math.log(x_max / x))


def combined_performance(cells: Sequence[CellResult]) -> List[CellResult]:
    """Score every cell in place and return the cells.

    Maxima are taken over the cells of the same seed. Cells with ``R == 0``
    keep ``val = None``; a zero B, L or U contributes nothing.
    """
    by_seed: Dict[int, List[CellResult]] = {}
    for c in cells:
        by_seed.setdefault(c.seed, []).append(c)
    for seed, group in by_seed.items():
        scored = [c for c in group if c.metrics.R > 0]
        excluded = len(group) - len(scored)
        if excluded:
            warnings.warn(f"seed {seed}: {excluded} cell(s) with R=0 left unscored", RuntimeWarning, stacklevel=2)
        if not scored:
            continue
        b_max = max(float(c.metrics.B) for c in scored)
        l_max = max(c.metrics.L for c in scored)
        u_max = max(c.metrics.U for c in scored)
        for c in scored:
            m = c.metrics
            r = float(m.R)
            for name, x in (("B", m.B), ("L", m.L), ("U", m.U)):
                if x == 0:
                    warnings.warn(f"seed {seed} {c.key}: {name}=0, term taken as 0", RuntimeWarning, stacklevel=2)
            m.terms = (_term(float(m.B), b_max, r), _term(float(m.L), l_max, r), _term(float(m.U), u_max, r))
            m.val = math.fsum(m.terms)
    for c in cells:
        if c.metrics.R <= 0:
            c.metrics.val = None
    return list(cells)


PARAMETERS = ("scheme", "alpha", "gamma", "eta")


def marginals(cells: Iterable[CellResult], seed: Optional[int] = None, metric: str = "val") -> Dict[str, Dict[object, float]]:
    """Mean of ``metric`` per value of each swept parameter.

    Args:
        cells: Scored cells.
        seed: Restrict to one seed; all seeds pooled when ``None``.
        metric: ``val``, one of ``R B L U``, or ``val_B``/``val_L``/``val_U``.
    """
    out: Dict[str, Dict[object, List[float]]] = {p: {} for p in PARAMETERS}
    for c in cells:
        if seed is not None and c.seed != seed:
            continue
        v = _metric(c, metric)
        if v is None:
            continue
        for p in PARAMETERS:
            k = c.scheme.value if p == "scheme" else getattr(c, p)
            out[p].setdefault(k, []).append(v)
    return {p: {k: fmean(v) for k, v in sorted(d.items(), key=lambda kv: _order(p, kv[0]))} for p, d in out.items()}


def _order(param: str, value):
    if param == "scheme":
        return [s.value for s in Scheme].index(value)
    return value


def _metric(c: CellResult, metric: str) -> Optional[float]:
    m = c.metrics
    if metric == "val":
        return m.val
    if metric in ("val_B", "val_L", "val_U"):
        return None if m.val is None else m.terms["BLU".index(metric[-1])]
    return float(getattr(m, metric))


# ---------------------------------------------------------------------------
# Running
# ---------------------------------------------------------------------------


def run_cell(
    base: AuxGraph,
    requests: Sequence[ServiceRequest],
    scheme: Scheme,
    alpha: float,
    gamma: float,
    eta: float,
    config: SweepConfig,
) -> RunMetrics:
    """Serve ``requests`` in order on a private copy of ``base``."""
    graph = base.copy()
    params = WeightParams(alpha=alpha, gamma=gamma, eta=eta, scheme=scheme)
    prov = Provisioner(graph, params, max_depth=config.max_depth)
    m = RunMetrics()
    unprot_ms: List[float] = []
    lpp_ms: List[float] = []
    for i, req in enumerate(requests):
        if config.timing and i < config.timing_sample:
            t0 = time.perf_counter()
            prov.search(req.src_ne, req.dst_ne, PathType.UNPROTECTED, 1, req.layer_rate, req.capacity_mbps)
            unprot_ms.append((time.perf_counter() - t0) * 1e3)
        t0 = time.perf_counter()
        if config.n_candidates == 1:
            res = prov.serve(replace(req, N=1))
        else:
            found = prov.search(req.src_ne, req.dst_ne, req.path_type, config.n_candidates, req.layer_rate, req.capacity_mbps)
            res = prov.provision(found[0], req.layer_rate, req.capacity_mbps, req.id) if found else None
        lpp_ms.append((time.perf_counter() - t0) * 1e3)
        if res is not None and res.accepted:
            m.accepted += 1
            m.R += req.demand
            m.B_service += res.service_mbps
        else:
            m.rejected += 1
    m.B, m.L, m.U = snapshot_metrics(graph)
    if config.timing:
        m.avg_ms_unprot = fmean(unprot_ms) if unprot_ms else None
        m.avg_ms_lpp = fmean(lpp_ms) if lpp_ms else None
    return m


_WORKER: Dict[str, object] = {}


def _init_worker(base: AuxGraph, requests: Dict[int, List[ServiceRequest]], config: SweepConfig) -> None:
    _WORKER.update(base=base, requests=requests, config=config)
    warmup()


def _run_worker(cell: Tuple[int, Scheme, float, float, float]) -> RunMetrics:
    seed, s, a, g, e = cell
    return run_cell(_WORKER["base"], _WORKER["requests"][seed], s, a, g, e, _WORKER["config"])


def run_sweep(
    network: Network,
    config: SweepConfig,
    requests: Optional[Dict[int, List[ServiceRequest]]] = None,
    progress=None,
) -> List[CellResult]:
    """Run every cell of ``config`` from the same starting state and score them.

    Args:
        network: Network to build the starting graph from.
        config: Sweep settings.
        requests: Request list per seed; generated from the seed when absent.
        progress: Optional callable taking ``(done, total)``.
    """
    base = build_auxiliary_graph(network, WeightParams())
    if requests is None:
        requests = {seed: generate_requests(network, config.n_requests, seed) for seed in config.seeds}
    missing = [s for s in config.seeds if s not in requests]
    if missing:
        raise ValidationError(f"no requests for seeds {missing}")
    cells = config.cells()
    results: List[RunMetrics] = []
    if config.workers == 1:
        warmup()
        for i, (seed, s, a, g, e) in enumerate(cells):
            try:
                results.append(run_cell(base, requests[seed], s, a, g, e, config))
            except Exception as exc:
                raise RuntimeError(f"cell seed={seed} scheme={s.value} alpha={a} gamma={g} eta={e} failed: {exc}") from exc
            if progress:
                progress(i + 1, len(cells))
    else:
        with ProcessPoolExecutor(config.workers, initializer=_init_worker, initargs=(base, requests, config)) as pool:
            for i, m in enumerate(pool.map(_run_worker, cells, chunksize=1)):
                results.append(m)
                if progress:
                    progress(i + 1, len(cells))
    out = [CellResult(seed, s, a, g, e, m) for (seed, s, a, g, e), m in zip(cells, results)]
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        combined_performance(out)
    for w in caught:
        logger.warning("%s", w.message)
    return out


# ---------------------------------------------------------------------------
# CSV and reports
# ---------------------------------------------------------------------------


def _num(x) -> str:
    if x is None:
        return ""
    if isinstance(x, Fraction):
        return str(x.numerator) if x.denominator == 1 else repr(float(x))
    if isinstance(x, float):
        return repr(x)
    return str(x)


def write_csv(cells: Sequence[CellResult], fh, extended: bool = False) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(EXTENDED_HEADER if extended else CSV_HEADER)
    for c in cells:
        m = c.metrics
        row = [c.scheme.value, _num(c.alpha), _num(c.gamma), _num(c.eta), c.seed, _num(m.R), _num(m.B), m.L, m.U]
        row += [_num(m.val), _num(m.avg_ms_unprot), _num(m.avg_ms_lpp)]
        if extended:
            row += [_num(m.B_service), m.accepted, m.rejected] + [_num(t) if m.val is not None else "" for t in m.terms]
        w.writerow(row)


def csv_text(cells: Sequence[CellResult], extended: bool = False) -> str:
    buf = _io.StringIO()
    write_csv(cells, buf, extended)
    return buf.getvalue()


def read_csv(fh) -> List[CellResult]:
    """Parse a sweep CSV (plain or extended) back into cells."""
    reader = csv.DictReader(fh)
    if reader.fieldnames is None or tuple(reader.fieldnames[: len(CSV_HEADER)]) != CSV_HEADER:
        raise ValidationError("unexpected sweep CSV header")

    def opt(v: str) -> Optional[float]:
        return float(v) if v not in ("", None) else None

    out = []
    for row in reader:
        m = RunMetrics(
            R=Fraction(row["R_mbps"]),
            B=Fraction(row["B_mbps"]),
            L=int(row["L_count"]),
            U=int(row["U_weighted"]),
            val=opt(row["val"]),
            avg_ms_unprot=opt(row["avg_ms_unprot"]),
            avg_ms_lpp=opt(row["avg_ms_lpp"]),
        )
        if "B_service_mbps" in row:
            m.B_service = Fraction(row["B_service_mbps"])
            m.accepted = int(row["accepted"])
            m.rejected = int(row["rejected"])
            if m.val is not None:
                m.terms = (float(row["val_B"]), float(row["val_L"]), float(row["val_U"]))
        out.append(CellResult(int(row["seed"]), Scheme(row["scheme"]), float(row["alpha"]), float(row["gamma"]), float(row["eta"]), m))
    return out


def format_marginals(table: Dict[str, Dict[object, float]], digits: int = 4) -> str:
    lines = []
    for param, values in table.items():
        lines.append(f"{param.upper():<8}Value")
        for k, v in values.items():
            lines.append(f"{str(k):<8}{v:.{digits}f}")
        lines.append("")
    return "\n".join(lines)


def scheme_ordering(cells: Sequence[CellResult]) -> Dict[int, List[str]]:
    """Schemes ordered by mean val, best first, for each seed."""
    out = {}
    for seed in sorted({c.seed for c in cells}):
        table = marginals(cells, seed)["scheme"]
        out[seed] = sorted(table, key=table.get)
    return out


def best_alpha(cells: Sequence[CellResult]) -> Dict[int, float]:
    """Alpha minimising the alpha-marginal of val, per seed."""
    out = {}
    for seed in sorted({c.seed for c in cells}):
        table = marginals(cells, seed)["alpha"]
        if table:
            out[seed] = min(table, key=lambda a: (table[a], a))
    return out


def term_breakdown(cells: Sequence[CellResult]) -> Dict[str, Dict[str, float]]:
    """Mean raw metrics and val terms per scheme, to locate where schemes differ."""
    out: Dict[str, Dict[str, float]] = {}
    for metric in ("R", "B", "L", "U", "val_B", "val_L", "val_U", "val"):
        for scheme, v in marginals(cells, metric=metric)["scheme"].items():
            out.setdefault(scheme, {})[metric] = v
    return out


def report(cells: Sequence[CellResult]) -> str:
    """Marginal tables of val, scheme order and alpha optimum per seed, and a term breakdown."""
    parts = ["Combined performance (mean val, lower is better)", "", format_marginals(marginals(cells))]
    parts.append("Scheme order per seed (best first)")
    for seed, order in scheme_ordering(cells).items():
        parts.append(f"  seed {seed}: {' < '.join(order)}")
    parts.append("")
    parts.append("Alpha minimising val per seed")
    for seed, a in best_alpha(cells).items():
        parts.append(f"  seed {seed}: {a:g}")
    parts.append("")
    parts.append("Per-scheme means")
    breakdown = term_breakdown(cells)
    cols = ("R", "B", "L", "U", "val_B", "val_L", "val_U", "val")
    parts.append("scheme  " + "".join(f"{c:>14}" for c in cols))
    for scheme, row in breakdown.items():
        parts.append(f"{scheme:<8}" + "".join(f"{row.get(c, float('nan')):>14.6g}" for c in cols))
    return "\n".join(parts) + "\n"
