"""Command line interface.

Exit codes: 0 on success, 2 when ``compute`` rejects a request, 1 on any
fault (bad input, I/O error, usage error).
"""

from __future__ import annotations

import json
import logging
import os
import sys
from typing import List, Optional

import click

from .graph import build_auxiliary_graph
from .harness import SweepConfig, read_csv, report, run_sweep, write_csv
from .io import load_network, load_requests, request_from_dict, save_network, save_requests
from .model import ValidationError
from .netgen import GenParams, generate, generate_requests
from .paths import DEFAULT_MAX_DEPTH, Path, ProtectedPath
from .provisioner import Provisioner, ProvisioningResult, ServiceRequest
from .weights import Scheme, WeightParams

EXIT_OK = 0
EXIT_FAULT = 1
EXIT_REJECTED = 2


class Rejected(Exception):
    """At least one computed request was rejected."""


def _read_json(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON ({exc})") from exc


@click.group()
@click.option("-v", "--verbose", count=True, help="Repeat for more logging.")
def cli(verbose: int) -> None:
    """Multi-layer path computation over an auxiliary graph."""
    level = logging.WARNING - 10 * min(verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


@cli.command("generate")
@click.option("--params", "params_file", type=click.Path(exists=True, dir_okay=False), help="Generator parameters (JSON).")
@click.option("--preset", type=click.Choice(["full", "desk"]), default="full", show_default=True, help="Base parameters before --params overrides.")
@click.option("--seed", type=int, default=None, help="Placement seed; overrides the parameter file.")
@click.option("--out", required=True, type=click.Path(dir_okay=False), help="Topology file to write.")
@click.option("--requests", "requests_out", type=click.Path(dir_okay=False), help="Also write a request list (JSON Lines).")
@click.option("--n-requests", type=int, default=500, show_default=True)
@click.option("--request-seed", type=int, default=None, help="Request seed; defaults to --seed.")
def generate_cmd(params_file, preset, seed, out, requests_out, n_requests, request_seed) -> None:
    """Generate a network and optionally a request list."""
    base = GenParams.desk_scale() if preset == "desk" else GenParams()
    data = base.to_dict()
    if params_file:
        data.update(_read_json(params_file))
    if seed is not None:
        data["seed"] = seed
    params = GenParams.from_dict(data)
    net = generate(params)
    save_network(net, out)
    click.echo(f"wrote {out}: {len(net.elements)} elements, {len(net.links)} links, {len(net.topologies)} topologies")
    if requests_out:
        rseed = params.seed if request_seed is None else request_seed
        reqs = generate_requests(net, n_requests, rseed)
        save_requests(reqs, requests_out)
        click.echo(f"wrote {requests_out}: {len(reqs)} requests")


def _parse_requests(spec: str) -> List[ServiceRequest]:
    if os.path.isfile(spec):
        return load_requests(spec)
    text = spec.strip()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"--request is neither a file nor JSON: {exc}") from exc
    items = data if isinstance(data, list) else [data]
    out = []
    for i, item in enumerate(items):
        item = dict(item)
        item.setdefault("id", f"Q{i}")
        out.append(request_from_dict(item))
    return out


def _format_path(label: str, p: Path) -> str:
    return f"{label} cost={p.total_cost:.9g} edges={' '.join(p.edges)}"


def _echo_result(res: ProvisioningResult) -> None:
    state = "accepted" if res.accepted else f"not provisioned ({res.reason})"
    click.echo(f"request {res.request_id}: {state}")
    for k, found in enumerate(res.paths):
        tag = f"[{k}] " if len(res.paths) > 1 else ""
        if isinstance(found, ProtectedPath):
            click.echo(f"  {tag}combined cost={found.combined_cost:.9g}")
            click.echo("  " + _format_path("working", found.working))
            for (a, b), prot in found.protection:
                click.echo("  " + _format_path(f"protection[{a}:{b}]", prot))
        else:
            click.echo("  " + tag + _format_path("path", found))
    if res.created_logical_links:
        click.echo(f"  created logical links: {' '.join(res.created_logical_links)}")
    if res.accepted:
        click.echo(f"  provisioned Mbps: {res.provisioned_mbps_total} (service {res.service_mbps})")


@cli.command("compute")
@click.option("--topo", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--request", "request_spec", required=True, help="Request as inline JSON (object or list) or a JSON Lines file.")
@click.option("--scheme", type=click.Choice(["plf", "lf", "wgm"], case_sensitive=False), default="plf", show_default=True)
@click.option("--alpha", type=float, default=0.5, show_default=True)
@click.option("--gamma", type=float, default=0.7, show_default=True)
@click.option("--eta", type=float, default=0.7, show_default=True)
@click.option("--max-depth", type=int, default=DEFAULT_MAX_DEPTH, show_default=True)
def compute_cmd(topo, request_spec, scheme, alpha, gamma, eta, max_depth) -> None:
    """Compute (and provision, when N=1) paths for requests served in order."""
    net = load_network(topo)
    requests = _parse_requests(request_spec)
    params = WeightParams(alpha=alpha, gamma=gamma, eta=eta, scheme=Scheme(scheme.upper()))
    prov = Provisioner(build_auxiliary_graph(net, params), params, max_depth=max_depth)
    rejected = 0
    for req in requests:
        res = prov.serve(req)
        _echo_result(res)
        if not res.accepted and not res.paths:
            rejected += 1
    if rejected:
        raise Rejected(f"{rejected} of {len(requests)} request(s) rejected")


@cli.command("sweep")
@click.option("--topo", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--config", "config_file", type=click.Path(exists=True, dir_okay=False), help="Sweep settings (JSON).")
@click.option("--requests", "requests_file", type=click.Path(exists=True, dir_okay=False), help="Request list used for every seed.")
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.option("--extended", is_flag=True, help="Append service bandwidth, counts and val terms.")
@click.option("--workers", type=int, default=None, help="Worker processes; overrides the config.")
@click.option("--no-timing", is_flag=True, help="Leave runtime columns empty for byte-stable output.")
def sweep_cmd(topo, config_file, requests_file, out, extended, workers, no_timing) -> None:
    """Run the parameter sweep and write the metrics CSV."""
    net = load_network(topo)
    data = _read_json(config_file) if config_file else {}
    if workers is not None:
        data["workers"] = workers
    if no_timing:
        data["timing"] = False
    config = SweepConfig.from_dict(data)
    requests = None
    if requests_file:
        reqs = load_requests(requests_file)
        requests = {seed: reqs for seed in config.seeds}

    def progress(done: int, total: int) -> None:
        if done == total or done % max(1, total // 20) == 0:
            click.echo(f"  {done}/{total} cells", err=True)

    cells = run_sweep(net, config, requests, progress=progress)
    with open(out, "w", encoding="utf-8", newline="") as fh:
        write_csv(cells, fh, extended=extended)
    click.echo(f"wrote {out}: {len(cells)} rows")


@cli.command("report")
@click.option("--csv", "csv_file", required=True, type=click.Path(exists=True, dir_okay=False))
def report_cmd(csv_file) -> None:
    """Print marginal tables of the combined score."""
    with open(csv_file, encoding="utf-8", newline="") as fh:
        cells = read_csv(fh)
    click.echo(report(cells), nl=False)


def main(argv: Optional[List[str]] = None) -> int:
    """Entry point; returns the process exit code."""
    try:
        cli.main(args=argv, prog_name="mlpce", standalone_mode=False)
    except Rejected as exc:
        click.echo(str(exc), err=True)
        return EXIT_REJECTED
    except click.exceptions.Exit as exc:
        return EXIT_OK if exc.exit_code == 0 else EXIT_FAULT
    except click.ClickException as exc:
        exc.show()
        return EXIT_FAULT
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return EXIT_FAULT
    except (ValidationError, ValueError, OSError, RuntimeError) as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_FAULT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
