"""protoscan command line.

Subcommands: ``targets build``, ``scan run`` (raw sockets), ``simulate``
(full pipeline against the built-in network simulator), ``analyze``,
and ``tagmap export``. Configuration layers flags over an optional INI
config file (section = subcommand path) over built-in defaults. Exit
status: 0 success, 1 usage error, 2 runtime failure.
"""

from __future__ import annotations

import configparser
import json
import shutil
import sys
from pathlib import Path

import click

from . import __version__, analysis, figures
from .censornet import CensorNetwork, load_scenario
from .domains import (
    BUNDLED_CONTROL_LIST,
    BUNDLED_TEST_LIST,
    DomainList,
    bundled_path,
    load_domain_list,
)
from .engine import (
    JsonlSink,
    ProbePlan,
    RawSocketTransport,
    Scanner,
    SimulatedTransport,
    parse_protocols,
    read_observations,
)
from .errors import ProtoscanError
from .runmeta import (
    CONTROLS_NAME,
    CURSOR_NAME,
    OBSERVATIONS_NAME,
    REPORT_DIR,
    TAGMAP_NAME,
    TARGETS_NAME,
    RunManifest,
    digest_inputs,
    sha256_file,
)
from .tagging import TagMap, build_tag_map
from .targets import (
    GeoTable,
    build_targets,
    load_targets_csv,
    parse_allocations,
    parse_announced,
    write_targets_csv,
)

ETHICS_POLICY = """\
Scan policy: probes are sent in round-robin order (every target receives
its probe for one domain before any target receives the next domain) and
each target is paced to at most one probe per pacing interval. Scanning
address space you are not authorized to probe may be illegal or harmful;
you are responsible for complying with your network's and jurisdiction's
rules, and for honoring opt-out requests.
"""


def _load_config(path: str | None) -> dict:
    """INI file -> click default_map; section names are subcommand paths."""
    if path is None:
        return {}
    parser = configparser.ConfigParser()
    if not parser.read(path):
        raise click.UsageError(f"cannot read config file {path}")
    defaults: dict = {}
    for section in parser.sections():
        node = defaults
        for part in section.split():
            node = node.setdefault(part, {})
        node.update({k.replace("-", "_"): v for k, v in parser[section].items()})
    return defaults


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.version_option(__version__, prog_name="protoscan")
@click.option("--config", type=click.Path(), default=None, help="INI config file.")
@click.pass_context
def cli(ctx: click.Context, config: str | None) -> None:
    """Bidirectional censorship measurement pipeline."""
    ctx.default_map = _load_config(config)


# --- targets ----------------------------------------------------------------


@cli.group()
def targets() -> None:
    """Target set construction."""


@targets.command("build")
@click.option("--allocations", required=True, type=click.Path(exists=True),
              help="RIR delegated-extended file.")
@click.option("--announced", required=True, type=click.Path(exists=True),
              help="Announced prefixes, one 'prefix<TAB>asn' per line.")
@click.option("--geo", type=click.Path(exists=True), default=None,
              help="Geolocation CSV 'prefix,country' (optional).")
@click.option("--n", default=10, show_default=True, help="Addresses per announced prefix.")
@click.option("--seed", default=0, show_default=True, help="Sampling seed.")
@click.option("--out", required=True, type=click.Path(), help="Output targets CSV.")
def targets_build(allocations: str, announced: str, geo: str | None, n: int, seed: int,
                  out: str) -> None:
    """Build the target set from registry, routing, and geolocation data."""
    allocs = parse_allocations(allocations)
    routes = parse_announced(announced)
    table = GeoTable.from_csv(geo) if geo else None
    result = build_targets(allocs, routes, table, n, seed)
    write_targets_csv(result, out)
    click.echo(f"wrote {len(result)} targets to {out}")


# --- tagmap -------------------------------------------------------------------


@cli.group()
def tagmap() -> None:
    """Domain-to-port tag map."""


@tagmap.command("export")
@click.option("--test-list", type=click.Path(exists=True), default=None)
@click.option("--control-list", type=click.Path(exists=True), default=None)
@click.option("--tag-seed", default=0, show_default=True)
@click.option("--out", required=True, type=click.Path())
def tagmap_export(test_list: str | None, control_list: str | None, tag_seed: int,
                  out: str) -> None:
    """Write the deterministic domain,port map for audit."""
    domains = _load_domains(test_list, control_list)
    build_tag_map(domains, tag_seed).to_csv(out)
    click.echo(f"wrote {len(domains.all_domains())} tag entries to {out}")


def _load_domains(test_list: str | None, control_list: str | None) -> DomainList:
    test = test_list or bundled_path(BUNDLED_TEST_LIST)
    control = control_list or bundled_path(BUNDLED_CONTROL_LIST)
    return load_domain_list(test, control)


# --- scan / simulate ----------------------------------------------------------


def _pipeline_options(fn):
    for deco in reversed(
        [
            click.option("--targets", "targets_csv", required=True,
                         type=click.Path(exists=True)),
            click.option("--test-list", type=click.Path(exists=True), default=None,
                         help="Defaults to the bundled global list."),
            click.option("--control-list", type=click.Path(exists=True), default=None,
                         help="Defaults to the bundled control fixture."),
            click.option("--protocols", default="dns,http,tls", show_default=True),
            click.option("--stateful", default="both", show_default=True,
                         type=click.Choice(["stateless", "stateful", "both"])),
            click.option("--rate", default=100.0, show_default=True,
                         help="Overall probes per second."),
            click.option("--pacing", default=None, type=float,
                         help="Per-target gap in seconds; default targets/rate."),
            click.option("--seed", default=0, show_default=True, help="Scan seed."),
            click.option("--tag-seed", default=0, show_default=True),
            click.option("--threshold", default=analysis.DEFAULT_THRESHOLD, show_default=True),
            click.option("--min-tested", default=analysis.DEFAULT_MIN_TESTED, show_default=True),
            click.option("--out", "out_dir", required=True, type=click.Path()),
        ]
    ):
        fn = deco(fn)
    return fn


@cli.command()
@click.option("--scenario", required=True, type=click.Path(exists=True),
              help="Simulated-network scenario JSON.")
@_pipeline_options
def simulate(scenario: str, targets_csv: str, test_list: str | None,
             control_list: str | None, protocols: str, stateful: str, rate: float,
             pacing: float | None, seed: int, tag_seed: int, threshold: float,
             min_tested: int, out_dir: str) -> None:
    """Run the full pipeline against the built-in censor simulator."""
    target_set = load_targets_csv(targets_csv)
    net = CensorNetwork.for_targets(load_scenario(scenario), target_set)
    transport = SimulatedTransport(net)
    _run_pipeline(
        command="simulate",
        transport=transport,
        target_set=target_set,
        domains=_load_domains(test_list, control_list),
        protocol_set=parse_protocols(protocols, stateful),
        rate=rate,
        pacing=pacing,
        seed=seed,
        tag_seed=tag_seed,
        threshold=threshold,
        min_tested=min_tested,
        out_dir=Path(out_dir),
        inputs={"targets": targets_csv, "scenario": scenario,
                "test_list": test_list, "control_list": control_list},
    )


@cli.group()
def scan() -> None:
    """Real-network scanning (raw sockets)."""


@scan.command("run")
@click.option("--source-v4", default=None, help="Local IPv4 source address.")
@click.option("--source-v6", default=None, help="Local IPv6 source address.")
@click.option("--i-understand-ethics", is_flag=True,
              help="Acknowledge the scan policy printed by this command.")
@click.option("--resume", is_flag=True, help="Resume from the run's cursor file.")
@_pipeline_options
def scan_run(source_v4: str | None, source_v6: str | None, i_understand_ethics: bool,
             resume: bool, targets_csv: str, test_list: str | None,
             control_list: str | None, protocols: str, stateful: str, rate: float,
             pacing: float | None, seed: int, tag_seed: int, threshold: float,
             min_tested: int, out_dir: str) -> None:
    """Scan the real network. Requires privileges and an explicit ethics ack."""
    click.echo(ETHICS_POLICY)
    if not i_understand_ethics:
        raise click.UsageError("refusing to scan without --i-understand-ethics")
    target_set = load_targets_csv(targets_csv)
    transport = RawSocketTransport(source_v4, source_v6)
    cursor = (0, 0)
    if resume:
        cursor_file = Path(out_dir) / CURSOR_NAME
        if cursor_file.exists():
            raw = json.loads(cursor_file.read_text())
            cursor = (raw["domain_index"], raw["target_index"])
            click.echo(f"resuming at domain index {cursor[0]}")
    try:
        _run_pipeline(
            command="scan run",
            transport=transport,
            target_set=target_set,
            domains=_load_domains(test_list, control_list),
            protocol_set=parse_protocols(protocols, stateful),
            rate=rate,
            pacing=pacing,
            seed=seed,
            tag_seed=tag_seed,
            threshold=threshold,
            min_tested=min_tested,
            out_dir=Path(out_dir),
            inputs={"targets": targets_csv, "test_list": test_list,
                    "control_list": control_list},
            start_cursor=cursor,
            skip_controls=cursor != (0, 0),
        )
    finally:
        transport.close()


def _run_pipeline(
    command: str,
    transport,
    target_set,
    domains: DomainList,
    protocol_set,
    rate: float,
    pacing: float | None,
    seed: int,
    tag_seed: int,
    threshold: float,
    min_tested: int,
    out_dir: Path,
    inputs: dict,
    start_cursor: tuple[int, int] = (0, 0),
    skip_controls: bool = False,
) -> None:
    if not target_set:
        raise ProtoscanError("target set is empty")
    out_dir.mkdir(parents=True, exist_ok=True)
    if pacing is None:
        pacing = max(0.001, len(target_set) / rate)

    tags = build_tag_map(domains, tag_seed)
    tags.to_csv(out_dir / TAGMAP_NAME)
    tagmap_digest = sha256_file(out_dir / TAGMAP_NAME)
    shutil.copyfile(inputs["targets"], out_dir / TARGETS_NAME)

    # defaulted domain lists still need digests: resolve to the bundled files
    digest_sources = dict(inputs)
    digest_sources.setdefault("test_list", None)
    digest_sources.setdefault("control_list", None)
    digest_sources["test_list"] = digest_sources["test_list"] or bundled_path(BUNDLED_TEST_LIST)
    digest_sources["control_list"] = (
        digest_sources["control_list"] or bundled_path(BUNDLED_CONTROL_LIST)
    )

    manifest = RunManifest(
        command=command,
        seeds={"tag": tag_seed, "scan": seed},
        input_digests=digest_inputs(digest_sources),
        protocols=[p.value for p in protocol_set],
        parameters={
            "rate": rate,
            "pacing": pacing,
            "threshold": threshold,
            "min_tested": min_tested,
            "control_domains": list(domains.control_domains),
            "test_domain_count": len(domains.test_domains),
            "tagmap_digest": tagmap_digest,
        },
    )
    manifest.write(out_dir)

    resuming = start_cursor != (0, 0)
    sink = JsonlSink(out_dir / OBSERVATIONS_NAME, mode="a" if resuming else "w")
    scanner = Scanner(tags, transport, sink=sink, checkpoint_path=out_dir / CURSOR_NAME)
    try:
        if skip_controls and (out_dir / CONTROLS_NAME).exists():
            responsive = set(json.loads((out_dir / CONTROLS_NAME).read_text())["control_responsive"])
        else:
            responsive = scanner.probe_controls(
                target_set, domains.control_domains, protocol_set, pacing, seed, rate=rate
            )
            (out_dir / CONTROLS_NAME).write_text(
                json.dumps(
                    {
                        "control_domains": list(domains.control_domains),
                        "control_responsive": sorted(responsive),
                    },
                    indent=2,
                )
                + "\n"
            )
        click.echo(f"{len(responsive)} of {len(target_set)} targets are control-responsive")

        plan = ProbePlan(
            domains=domains.test_domains,
            targets=tuple(target_set),
            protocols=tuple(protocol_set),
            pacing=pacing,
            seed=seed,
            rate=rate,
        )
        observations = scanner.run_scan(plan, start_cursor=start_cursor)
    finally:
        sink.close()
    click.echo(f"recorded {len(observations)} observations")

    # report files live beside the raw run artifacts
    _analyze_run(out_dir, out_dir, threshold, min_tested)
    manifest.finalize(out_dir)
    click.echo(f"run complete: {out_dir}")


# --- analyze -------------------------------------------------------------------


def _analyze_run(run_dir: Path, report_dir: Path, threshold: float, min_tested: int) -> None:
    manifest = RunManifest.load(run_dir)
    target_set = load_targets_csv(run_dir / TARGETS_NAME)
    controls = json.loads((run_dir / CONTROLS_NAME).read_text())
    observations = read_observations(run_dir / OBSERVATIONS_NAME)
    tag_domains = set(TagMap.from_csv(run_dir / TAGMAP_NAME).domain_to_port)
    control_domains = frozenset(controls["control_domains"])

    outcomes, anomalies = analysis.fold_observations(
        observations,
        set(controls["control_responsive"]),
        target_set,
        control_domains=control_domains,
        probed_domains=frozenset(tag_domains - control_domains),
    )
    verdicts = analysis.compute_verdicts(
        outcomes, threshold=threshold, min_tested=min_tested, protocols=manifest.protocols
    )
    differential = analysis.differential_report(verdicts)

    report_dir.mkdir(parents=True, exist_ok=True)
    analysis.write_verdicts_csv(verdicts, report_dir / "verdicts.csv")
    analysis.write_differential_csv(differential, report_dir / "differential.csv")
    analysis.write_anomalies_jsonl(anomalies, report_dir / "anomalies.jsonl")
    figures.render_report_figures(verdicts, differential, report_dir, threshold=threshold)
    censoring = sum(1 for v in verdicts if v.scope_type == "country" and v.censoring)
    click.echo(f"report in {report_dir}: {censoring} censoring (country, protocol, version) cells")


@cli.command()
@click.option("--run", "run_dir", required=True, type=click.Path(exists=True))
@click.option("--threshold", default=analysis.DEFAULT_THRESHOLD, show_default=True)
@click.option("--min-tested", default=analysis.DEFAULT_MIN_TESTED, show_default=True)
@click.option("--out", "report_dir", default=None, type=click.Path(),
              help="Report directory; defaults to RUN/report.")
def analyze(run_dir: str, threshold: float, min_tested: int, report_dir: str | None) -> None:
    """Recompute verdicts and figures from a recorded run directory."""
    run_path = Path(run_dir)
    _analyze_run(run_path, Path(report_dir) if report_dir else run_path / REPORT_DIR,
                 threshold, min_tested)


def main(argv: list[str] | None = None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.UsageError as exc:
        exc.show()
        return 1
    except click.ClickException as exc:
        exc.show()
        return 2
    except click.Abort:
        click.echo("aborted", err=True)
        return 130
    except ProtoscanError as exc:
        click.echo(f"error: {exc}", err=True)
        return 2
    except OSError as exc:
        click.echo(f"error: {exc}", err=True)
        return 2


if __name__ == "__main__":
    sys.exit(main())
