"""End-to-end CLI behavior: exit codes, run layout, determinism."""

import json

import pytest

from protoscan.cli import main
from protoscan.targets import write_targets_csv

from simharness import country_targets

BLOCKED = "blocked.example"
BENIGN = "benign.example"


@pytest.fixture
def world(tmp_path):
    """Targets CSV, domain lists, and a censoring scenario on disk."""
    targets = country_targets("XA", 12) + country_targets("XB", 12, block=1)
    targets_csv = tmp_path / "targets.csv"
    write_targets_csv(targets, targets_csv)

    test_list = tmp_path / "test.txt"
    test_list.write_text(f"{BLOCKED}\n{BENIGN}\n")
    control_list = tmp_path / "control.txt"
    control_list.write_text("control-a.example\ncontrol-b.example\n")

    scenario = tmp_path / "scenario.json"
    scenario.write_text(
        json.dumps(
            {
                "seed": 5,
                "countries": {
                    "XA": {
                        "blocklist": [BLOCKED],
                        "protocols": ["dns", "http", "tls"],
                        "coverage": 1.0,
                    }
                },
            }
        )
    )
    return {
        "targets": targets_csv,
        "test_list": test_list,
        "control_list": control_list,
        "scenario": scenario,
        "tmp": tmp_path,
    }


def simulate_args(world, out, extra=()):
    return [
        "simulate",
        "--scenario", str(world["scenario"]),
        "--targets", str(world["targets"]),
        "--test-list", str(world["test_list"]),
        "--control-list", str(world["control_list"]),
        "--protocols", "dns,http,tls",
        "--stateful", "both",
        "--min-tested", "5",
        "--out", str(out),
        *extra,
    ]


def test_simulate_produces_run_directory(world):
    out = world["tmp"] / "run1"
    assert main(simulate_args(world, out)) == 0
    for name in ("manifest.json", "tagmap.csv", "targets.csv", "observations.jsonl",
                 "controls.json", "verdicts.csv", "differential.csv",
                 "anomalies.jsonl", "prevalence.png", "fractions.png"):
        assert (out / name).exists(), name

    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["command"] == "simulate"
    assert manifest["finished_at"] is not None
    assert len(manifest["protocols"]) == 6
    assert set(manifest["input_digests"]) == {"targets", "scenario", "test_list", "control_list"}
    assert manifest["parameters"]["tagmap_digest"]


def test_simulate_verdicts_match_scenario(world):
    out = world["tmp"] / "run2"
    assert main(simulate_args(world, out)) == 0
    rows = (out / "verdicts.csv").read_text().splitlines()[1:]
    cells = {}
    for row in rows:
        scope, scope_type, protocol, ipv, tested, injected, fraction, censoring = row.split(",")
        if scope_type == "country":
            cells[(scope, protocol)] = censoring
    # XA censors everything it was probed with; XB censors nothing
    assert cells[("XA", "dns_a")] == "true"
    assert cells[("XA", "http_stateful")] == "true"
    assert cells[("XB", "dns_a")] == "false"
    assert cells[("XB", "tls_stateless")] == "false"


def test_missing_required_flag_is_usage_error(world):
    args = simulate_args(world, world["tmp"] / "x")
    idx = args.index("--targets")
    del args[idx : idx + 2]
    assert main(args) == 1


def test_unknown_flag_is_usage_error():
    assert main(["simulate", "--bogus"]) == 1


def test_bad_input_is_runtime_error(world):
    bad = world["tmp"] / "bad_scenario.json"
    bad.write_text("{not json")
    args = simulate_args(world, world["tmp"] / "y")
    args[args.index("--scenario") + 1] = str(bad)
    assert main(args) == 2


def test_targets_build_deterministic(world, tmp_path):
    alloc = tmp_path / "delegated"
    alloc.write_text(
        "apnic|XA|ipv4|10.0.0.0|256|20200101|allocated|ORG1\n"
        "apnic|XA|ipv6|2001:db8::|32|20200101|allocated|ORG1\n"
    )
    announced = tmp_path / "announced.tsv"
    announced.write_text("10.0.0.0/25\t64500\n2001:db8:1::/64\t64500\n")
    geo = tmp_path / "geo.csv"
    geo.write_text("10.0.0.0/8,XB\n")

    args = ["targets", "build", "--allocations", str(alloc), "--announced", str(announced),
            "--geo", str(geo), "--n", "5", "--seed", "11"]
    out_a, out_b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(args + ["--out", str(out_a)]) == 0
    assert main(args + ["--out", str(out_b)]) == 0
    assert out_a.read_bytes() == out_b.read_bytes()
    body = out_a.read_text().splitlines()
    assert body[0] == "addr,prefix,asn,org,country,ip_version"
    assert len(body) == 1 + 5 + 5
    assert all(row.split(",")[4] == "XB" for row in body[1:6])  # geo override applies


def test_tagmap_export_deterministic(world, tmp_path):
    args = ["tagmap", "export", "--test-list", str(world["test_list"]),
            "--control-list", str(world["control_list"]), "--tag-seed", "9"]
    out_a, out_b = tmp_path / "tm_a.csv", tmp_path / "tm_b.csv"
    assert main(args + ["--out", str(out_a)]) == 0
    assert main(args + ["--out", str(out_b)]) == 0
    assert out_a.read_bytes() == out_b.read_bytes()
    lines = out_a.read_text().splitlines()
    assert lines[0] == "domain,port"
    assert len(lines) == 1 + 4


def test_simulate_rerun_reproduces_artifacts(world):
    out_a, out_b = world["tmp"] / "rep_a", world["tmp"] / "rep_b"
    assert main(simulate_args(world, out_a)) == 0
    assert main(simulate_args(world, out_b)) == 0
    for name in ("tagmap.csv", "targets.csv", "observations.jsonl", "verdicts.csv"):
        assert (out_a / name).read_bytes() == (out_b / name).read_bytes(), name


def test_analyze_recomputes_report(world):
    run = world["tmp"] / "run3"
    assert main(simulate_args(world, run)) == 0
    report = world["tmp"] / "fresh_report"
    assert main(["analyze", "--run", str(run), "--threshold", "0.2",
                 "--min-tested", "5", "--out", str(report)]) == 0
    assert (report / "verdicts.csv").read_bytes() == (run / "verdicts.csv").read_bytes()


def test_analyze_min_tested_changes_verdicts(world):
    run = world["tmp"] / "run4"
    assert main(simulate_args(world, run)) == 0
    report = world["tmp"] / "strict_report"
    # a floor higher than any denominator makes every cell indeterminate
    assert main(["analyze", "--run", str(run), "--threshold", "0.2",
                 "--min-tested", "999", "--out", str(report)]) == 0
    rows = (report / "verdicts.csv").read_text().splitlines()[1:]
    assert rows and all(row.split(",")[-1] == "indeterminate" for row in rows)


def test_scan_run_requires_ethics_ack(world, capsys):
    args = [
        "scan", "run",
        "--targets", str(world["targets"]),
        "--test-list", str(world["test_list"]),
        "--control-list", str(world["control_list"]),
        "--out", str(world["tmp"] / "rawrun"),
    ]
    assert main(args) == 1
    out = capsys.readouterr().out
    assert "round-robin" in out  # the policy is printed before refusing


def test_config_file_supplies_defaults(world, tmp_path):
    config = tmp_path / "protoscan.ini"
    config.write_text("[tagmap export]\ntag-seed = 9\n")
    out_cfg = tmp_path / "tm_cfg.csv"
    args = ["--config", str(config), "tagmap", "export",
            "--test-list", str(world["test_list"]),
            "--control-list", str(world["control_list"]),
            "--out", str(out_cfg)]
    assert main(args) == 0
    explicit = tmp_path / "tm_explicit.csv"
    assert main(["tagmap", "export", "--test-list", str(world["test_list"]),
                 "--control-list", str(world["control_list"]), "--tag-seed", "9",
                 "--out", str(explicit)]) == 0
    assert out_cfg.read_bytes() == explicit.read_bytes()


def test_version_flag(capsys):
    assert main(["--version"]) == 0
    assert "protoscan" in capsys.readouterr().out
