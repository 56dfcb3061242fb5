"""Fix the random-ring count against the target element count and report the rest.

Solves ``random_agg_rings_per_location`` so that the generated network has
exactly ``--target`` elements, then builds the network and compares every
auxiliary-graph count with the reference figures.

Usage::

    python scripts/calibrate_netgen.py [--target 2955] [--seed 0]
"""

from __future__ import annotations

import argparse
from dataclasses import replace

from mlpce.graph import build_auxiliary_graph
from mlpce.netgen import GenParams, calibrate_random_rings, expected_counts, generate
from mlpce.weights import WeightParams

REFERENCE = {
    "tech_layer_nodes": 10455,
    "hub_nodes": 480,
    "adaptation_edges": 10380,
    "physical_links": 5393,
    "special_edges": 3540,
    "edges": 19313,
}


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--target", type=int, default=2955)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    rings = calibrate_random_rings(args.target)
    params = replace(GenParams(seed=args.seed), random_agg_rings_per_location=rings)
    print(f"random_agg_rings_per_location = {rings} (default {GenParams().random_agg_rings_per_location})")
    net = generate(params)
    built = build_auxiliary_graph(net, WeightParams()).counts()
    closed = expected_counts(params)
    print(f"{'count':<20}{'built':>10}{'closed form':>13}{'reference':>11}{'deviation':>11}")
    print(f"{'network_elements':<20}{len(net.elements):>10}{closed['network_elements']:>13}{args.target:>11}{'':>11}")
    for key, ref in REFERENCE.items():
        dev = (built[key] - ref) / ref
        print(f"{key:<20}{built[key]:>10}{closed[key]:>13}{ref:>11}{dev:>+10.2%}")


if __name__ == "__main__":
    main()
