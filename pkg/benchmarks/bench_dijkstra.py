"""Time the label-setting search with and without numba.

Runs itself twice in subprocesses, once with ``MLPCE_DISABLE_NUMBA=1``, on
the same generated network and the same random service-port pairs, and
prints mean and max milliseconds per query plus the speedup.

Usage::

    python benchmarks/bench_dijkstra.py [--preset desk|full] [--queries N]
"""

from __future__ import annotations

import argparse
import json
import os
import random
import statistics
import subprocess
import sys
import time


def _measure(preset: str, queries: int, seed: int) -> dict:
    from mlpce import _kernels
    from mlpce.graph import build_auxiliary_graph, node_id
    from mlpce.netgen import SDH_SERVICE, GenParams, generate
    from mlpce.paths import SearchView
    from mlpce.weights import WeightParams

    params = GenParams.desk_scale(seed=seed) if preset == "desk" else GenParams(seed=seed)
    net = generate(params)
    graph = build_auxiliary_graph(net, WeightParams())
    view = SearchView(graph)
    ports = sorted(graph.node_index(node_id(ne.id, SDH_SERVICE)) for ne in net.elements.values() if SDH_SERVICE in ne.supported)
    rng = random.Random(seed)
    pairs = [tuple(rng.sample(ports, 2)) for _ in range(queries)]
    t0 = time.perf_counter()
    view.run(*pairs[0])
    first = time.perf_counter() - t0
    times = []
    found = 0
    for s, d in pairs:
        t0 = time.perf_counter()
        found += view.run(s, d) is not None
        times.append((time.perf_counter() - t0) * 1e3)
    return {
        "numba": _kernels.NUMBA_ENABLED,
        "nodes": graph.n_nodes,
        "edges": graph.n_edges,
        "first_call_ms": first * 1e3,
        "mean_ms": statistics.fmean(times),
        "max_ms": max(times),
        "found": found,
    }


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--preset", choices=("desk", "full"), default="desk")
    ap.add_argument("--queries", type=int, default=50)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--child", action="store_true", help=argparse.SUPPRESS)
    args = ap.parse_args()
    if args.child:
        print(json.dumps(_measure(args.preset, args.queries, args.seed)))
        return
    results = {}
    for label, flag in (("numba", "0"), ("python", "1")):
        env = dict(os.environ, MLPCE_DISABLE_NUMBA=flag)
        cmd = [sys.executable, __file__, "--child", "--preset", args.preset, "--queries", str(args.queries), "--seed", str(args.seed)]
        out = subprocess.run(cmd, env=env, check=True, capture_output=True, text=True).stdout
        results[label] = json.loads(out.strip().splitlines()[-1])
    r = results["numba"]
    print(f"graph: {r['nodes']} nodes, {r['edges']} edges, {args.queries} queries")
    for label, r in results.items():
        print(f"{label:>7}: mean {r['mean_ms']:.3f} ms  max {r['max_ms']:.3f} ms  first call {r['first_call_ms']:.1f} ms  found {r['found']}")
    speedup = results["python"]["mean_ms"] / max(results["numba"]["mean_ms"], 1e-9)
    print(f"speedup: {speedup:.1f}x")
    if results["numba"]["found"] != results["python"]["found"]:
        sys.exit("numba and python kernels disagree")


if __name__ == "__main__":
    main()
