from __future__ import annotations

import io
import warnings
from fractions import Fraction

import pytest

from randgraphs import chain_network

from mlpce.graph import EdgeKind, build_auxiliary_graph
from mlpce.harness import (
    CSV_HEADER,
    CellResult,
    RunMetrics,
    SweepConfig,
    best_alpha,
    combined_performance,
    csv_text,
    marginals,
    read_csv,
    report,
    run_cell,
    run_sweep,
    scheme_ordering,
    snapshot_metrics,
    term_breakdown,
    weighted_link_utilization,
)
from mlpce.model import RateKind, ValidationError, consume
from mlpce.netgen import generate_requests
from mlpce.provisioner import BEARER_KINDS, PathType, Provisioner, ServiceRequest
from mlpce.weights import ParameterError, Scheme, WeightParams

TINY = dict(alphas=(0.0, 1.0), gammas=(0.7,), etas=(0.7,), timing=False)


def chain_requests(n, n_ne=4):
    rates = (RateKind.VC12, RateKind.VC3, RateKind.VC4)
    return [ServiceRequest(f"R{i}", "E0", f"E{1 + i % (n_ne - 1)}", PathType.UNPROTECTED, 1, rates[i % 3]) for i in range(n)]


def load(graph, eid, mbps):
    e = graph.edge(eid)
    e.pool = consume(e.pool, RateKind.ETH_BW, Fraction(mbps))


class TestUtilization:
    def test_idle_links_count_one(self):
        g = build_auxiliary_graph(chain_network(4, RateKind.STM1))
        assert weighted_link_utilization(g) == 3

    def test_quartile_example(self):
        g = build_auxiliary_graph(chain_network(4, RateKind.STM1))
        load(g, "K000", Fraction(3, 10) * 155)
        load(g, "K001", Fraction(3, 10) * 155)
        load(g, "K002", Fraction(8, 10) * 155)
        assert weighted_link_utilization(g) == 8

    def test_bucket_edges_are_exclusive(self):
        g = build_auxiliary_graph(chain_network(2, RateKind.STM1))
        load(g, "K000", Fraction(155, 4))
        assert weighted_link_utilization(g) == 1

    def test_monotone_over_a_run(self, desk_network):
        g = build_auxiliary_graph(desk_network)
        prov = Provisioner(g, WeightParams())
        last = weighted_link_utilization(g)
        for req in generate_requests(desk_network, 50, seed=8):
            prov.serve(req)
            now = weighted_link_utilization(g)
            assert now >= last
            last = now


class TestCombinedPerformance:
    def cell(self, seed, R, B, L, U, alpha=0.0, scheme=Scheme.PLF):
        return CellResult(seed, scheme, alpha, 0.7, 0.7, RunMetrics(R=Fraction(R), B=Fraction(B), L=L, U=U))

    def test_single_cell_at_max(self):
        (c,) = combined_performance([self.cell(0, 10, 30, 4, 6)])
        assert c.metrics.val == pytest.approx((30 + 4 + 6) / 10)

    def test_log_penalty(self):
        a, b = combined_performance([self.cell(0, 10, 30, 4, 6), self.cell(0, 10, 15, 4, 6)])
        assert b.metrics.terms[0] == pytest.approx(1.5 * (1 + 0.6931471805599453))
        assert a.metrics.terms[0] == pytest.approx(3.0)

    def test_maxima_per_seed(self):
        a, b = combined_performance([self.cell(0, 10, 30, 4, 6), self.cell(1, 10, 15, 4, 6)])
        assert a.metrics.val == pytest.approx(4.0)
        assert b.metrics.val == pytest.approx((15 + 4 + 6) / 10)

    def test_zero_R_unscored(self):
        with pytest.warns(RuntimeWarning):
            a, b = combined_performance([self.cell(0, 0, 0, 0, 3), self.cell(0, 10, 30, 0, 6)])
        assert a.metrics.val is None
        assert b.metrics.terms[1] == 0.0

    def test_marginals_and_orderings(self):
        cells = combined_performance(
            [
                self.cell(0, 10, 30, 4, 6, alpha=0.0, scheme=Scheme.PLF),
                self.cell(0, 10, 20, 4, 6, alpha=0.5, scheme=Scheme.PLF),
                self.cell(0, 10, 30, 4, 6, alpha=0.0, scheme=Scheme.LF),
                self.cell(0, 10, 30, 4, 6, alpha=0.5, scheme=Scheme.LF),
            ]
        )
        table = marginals(cells, 0)
        assert list(table["scheme"]) == ["PLF", "LF"]
        assert table["scheme"]["PLF"] < table["scheme"]["LF"]
        assert scheme_ordering(cells) == {0: ["PLF", "LF"]}
        assert best_alpha(cells) == {0: 0.5}
        assert set(term_breakdown(cells)["PLF"]) == {"R", "B", "L", "U", "val_B", "val_L", "val_U", "val"}
        assert "seed 0: PLF < LF" in report(cells)


class TestRunCell:
    def test_R_bounded_by_demand(self, desk_network):
        reqs = generate_requests(desk_network, 40, seed=1)
        base = build_auxiliary_graph(desk_network)
        m = run_cell(base, reqs, Scheme.PLF, 0.5, 0.7, 0.7, SweepConfig(timing=False))
        total = sum(r.demand for r in reqs)
        assert m.accepted + m.rejected == len(reqs)
        assert m.R <= total
        assert (m.R == total) == (m.rejected == 0)

    def test_full_acceptance_gives_equality(self):
        base = build_auxiliary_graph(chain_network(4))
        reqs = chain_requests(6)
        m = run_cell(base, reqs, Scheme.LF, 0.5, 0.7, 0.7, SweepConfig(timing=False))
        assert m.rejected == 0 and m.R == sum(r.demand for r in reqs)

    def test_base_untouched(self):
        base = build_auxiliary_graph(chain_network(4))
        before = base.digest()
        run_cell(base, chain_requests(6), Scheme.WGM, 0.5, 0.7, 0.7, SweepConfig())
        assert base.digest() == before

    def test_metrics_recompute_from_snapshot(self, desk_network):
        g = build_auxiliary_graph(desk_network)
        prov = Provisioner(g, WeightParams(alpha=0.3))
        created = 0
        charged = Fraction(0)
        for req in generate_requests(desk_network, 40, seed=6):
            res = prov.serve(req)
            if res.accepted:
                created += len(res.created_logical_links)
                charged += sum(m for eid, m in res.charges if g.edge(eid).kind in BEARER_KINDS)
        B, L, U = snapshot_metrics(g)
        assert L == created == sum(1 for e in g.edges if e.kind is EdgeKind.LOGICAL)
        assert B == charged

    def test_timing_columns(self):
        base = build_auxiliary_graph(chain_network(4))
        m = run_cell(base, chain_requests(3), Scheme.PLF, 0.5, 0.7, 0.7, SweepConfig(timing_sample=2))
        assert m.avg_ms_unprot is not None and m.avg_ms_lpp is not None
        m = run_cell(base, chain_requests(3), Scheme.PLF, 0.5, 0.7, 0.7, SweepConfig(timing=False))
        assert m.avg_ms_unprot is None and m.avg_ms_lpp is None

    def test_candidates(self):
        base = build_auxiliary_graph(chain_network(3, ring=True))
        m = run_cell(base, chain_requests(4, 3), Scheme.PLF, 0.5, 0.7, 0.7, SweepConfig(n_candidates=3, timing=False))
        assert m.accepted == 4


class TestSweep:
    def test_default_grid_rows(self):
        cfg = SweepConfig(timing=False)
        assert cfg.n_cells == 297
        cells = run_sweep(chain_network(3), cfg, requests={0: chain_requests(2, 3)})
        text = csv_text(cells)
        assert text.count("\n") == 298
        assert text.splitlines()[0] == ",".join(CSV_HEADER)

    def test_byte_identical(self, desk_network):
        cfg = SweepConfig(seeds=(0, 1), n_requests=15, **TINY)
        a = csv_text(run_sweep(desk_network, cfg), extended=True)
        b = csv_text(run_sweep(desk_network, cfg), extended=True)
        assert a == b

    def test_workers_match_serial(self):
        reqs = {0: chain_requests(5)}
        serial = run_sweep(chain_network(4), SweepConfig(**TINY), requests=reqs)
        pooled = run_sweep(chain_network(4), SweepConfig(workers=2, **TINY), requests=reqs)
        assert csv_text(serial) == csv_text(pooled)

    def test_csv_roundtrip(self):
        cells = run_sweep(chain_network(4), SweepConfig(**TINY), requests={0: chain_requests(5)})
        text = csv_text(cells, extended=True)
        again = read_csv(io.StringIO(text))
        assert csv_text(again, extended=True) == text

    def test_missing_seed_requests(self):
        with pytest.raises(ValidationError):
            run_sweep(chain_network(3), SweepConfig(seeds=(0, 1), **TINY), requests={0: []})

    def test_bad_header(self):
        with pytest.raises(ValidationError):
            read_csv(io.StringIO("a,b\n1,2\n"))


class TestConfig:
    def test_roundtrip(self):
        cfg = SweepConfig(schemes=("lf", "WGM"), seeds=[3], timing=False)
        assert cfg.schemes == (Scheme.LF, Scheme.WGM)
        assert SweepConfig.from_dict(cfg.to_dict()) == cfg

    def test_unknown_key(self):
        with pytest.raises(ValidationError):
            SweepConfig.from_dict({"alpha": [0.5]})

    def test_invalid(self):
        with pytest.raises(ValidationError):
            SweepConfig(alphas=())
        with pytest.raises(ValidationError):
            SweepConfig(workers=0)
        with pytest.raises(ParameterError):
            SweepConfig(gammas=(1.0,))

    def test_cell_order(self):
        cells = SweepConfig(seeds=(2, 1)).cells()
        assert cells[0] == (2, Scheme.PLF, 0.0, 0.5, 0.5)
        assert cells[-1] == (1, Scheme.WGM, 1.0, 0.9, 0.9)


def test_no_warnings_on_clean_sweep():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        run_sweep(chain_network(4), SweepConfig(**TINY), requests={0: chain_requests(3)})
