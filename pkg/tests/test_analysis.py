"""Folding, thresholding, differential categories, and report files."""

import pytest

from protoscan.analysis import (
    IpOutcome,
    Verdict,
    compute_verdicts,
    differential_report,
    fold_observations,
    load_verdicts_csv,
    write_anomalies_jsonl,
    write_differential_csv,
    write_verdicts_csv,
)
from protoscan.engine.scan import ResponseObservation
from protoscan.figures import render_report_figures
from protoscan.targets import TargetAddress


def target(addr, cc="XA", asn=64500, version=4):
    prefix = f"{addr.rsplit('.', 1)[0]}.0/24" if version == 4 else "2001:db8::/64"
    return TargetAddress(addr, prefix, asn, "ORG", cc, version)


def obs(target_addr, domain, protocol="tls_stateful", valid=True, cls="rst"):
    return ResponseObservation(
        timestamp="1970-01-01T00:00:00+00:00",
        target=target_addr,
        domain=domain,
        probe_protocol=protocol,
        response_class=cls,
        valid_tag=valid,
        payload_digest="",
        payload_len=0,
        seq_delta=0,
    )


def outcome(addr, cc="XA", asn=64500, version=4, responsive=False, injected=()):
    return IpOutcome(
        addr=addr,
        country=cc,
        asn=asn,
        ip_version=version,
        control_responsive=responsive,
        injected_protocols=frozenset(injected),
        response_class_counts={},
    )


def test_fold_marks_injected_protocols():
    targets = [target("10.0.0.1"), target("10.0.0.2")]
    outcomes, anomalies = fold_observations(
        [obs("10.0.0.1", "blocked.example")], set(), targets
    )
    assert not anomalies
    by_addr = {o.addr: o for o in outcomes}
    assert by_addr["10.0.0.1"].injected_protocols == frozenset({"tls_stateful"})
    assert by_addr["10.0.0.2"].injected_protocols == frozenset()
    assert not by_addr["10.0.0.2"].control_responsive  # silent but counted


def test_fold_control_responses_exclude_target():
    targets = [target("10.0.0.1")]
    outcomes, _ = fold_observations(
        [obs("10.0.0.1", "control-00.example", protocol="http_stateless")],
        set(),
        targets,
        control_domains=frozenset({"control-00.example"}),
    )
    assert outcomes[0].control_responsive
    assert outcomes[0].injected_protocols == frozenset()


def test_fold_pre_identified_control_set():
    targets = [target("10.0.0.1")]
    outcomes, _ = fold_observations([], {"10.0.0.1"}, targets)
    assert outcomes[0].control_responsive


def test_fold_unknown_target_is_anomaly():
    outcomes, anomalies = fold_observations(
        [obs("203.0.113.99", "blocked.example")], set(), [target("10.0.0.1")]
    )
    assert len(anomalies) == 1 and anomalies[0]["kind"] == "unknown_target"
    assert outcomes[0].injected_protocols == frozenset()


def test_fold_unprobed_domain_is_anomaly():
    targets = [target("10.0.0.1")]
    outcomes, anomalies = fold_observations(
        [obs("10.0.0.1", "weird.example")],
        set(),
        targets,
        probed_domains=frozenset({"blocked.example"}),
    )
    assert len(anomalies) == 1 and anomalies[0]["kind"] == "unprobed_domain"
    assert outcomes[0].injected_protocols == frozenset()


def test_fold_invalid_tags_never_count():
    targets = [target("10.0.0.1")]
    outcomes, anomalies = fold_observations(
        [obs("10.0.0.1", "blocked.example", valid=False)], set(), targets
    )
    assert outcomes[0].injected_protocols == frozenset()
    assert not anomalies
    assert outcomes[0].response_class_counts == {"rst": 1}


def _country_outcomes(n, injected_count, protocol="dns_a", cc="XA", version=4, responsive=0):
    out = []
    for i in range(n):
        out.append(
            outcome(
                f"10.7.{i // 200}.{i % 200 + 1}" if version == 4 else f"2001:db8::{i + 1:x}",
                cc=cc,
                version=version,
                responsive=i < responsive,
                injected={protocol} if responsive <= i < responsive + injected_count else (),
            )
        )
    return out


def test_verdict_three_of_ten_censoring_true():
    verdicts = compute_verdicts(_country_outcomes(10, 3), threshold=0.20, min_tested=10)
    country = [v for v in verdicts if v.scope_type == "country"][0]
    assert country.tested_count == 10 and country.injected_count == 3
    assert country.fraction == pytest.approx(0.30)
    assert country.censoring is True


def test_verdict_exactly_at_threshold_is_false():
    verdicts = compute_verdicts(_country_outcomes(10, 2), threshold=0.20, min_tested=10)
    country = [v for v in verdicts if v.scope_type == "country"][0]
    assert country.fraction == pytest.approx(0.20)
    assert country.censoring is False  # strictly greater than, not >=


def test_verdict_40_v6_targets_zero_injected_false():
    outcomes = _country_outcomes(40, 0, cc="TZ", version=6)
    verdicts = compute_verdicts(outcomes, protocols=["http_stateful"])
    country = [v for v in verdicts if v.scope_type == "country"][0]
    assert country.tested_count == 40 and country.censoring is False


def test_verdict_min_tested_indeterminate():
    verdicts = compute_verdicts(_country_outcomes(5, 5), min_tested=10)
    country = [v for v in verdicts if v.scope_type == "country"][0]
    assert country.censoring is None
    assert country.censoring_label == "indeterminate"


def test_verdict_excludes_control_responsive_from_denominator():
    outcomes = _country_outcomes(12, 3, responsive=2)
    verdicts = compute_verdicts(outcomes)
    country = [v for v in verdicts if v.scope_type == "country"][0]
    assert country.tested_count == 10
    assert country.fraction == pytest.approx(0.30)


def test_verdict_asn_scope_present():
    verdicts = compute_verdicts(_country_outcomes(10, 3))
    asn = [v for v in verdicts if v.scope_type == "asn"]
    assert asn and asn[0].scope == "AS64500" and asn[0].censoring is True


def test_verdict_monotonicity():
    base = _country_outcomes(10, 3)
    more = _country_outcomes(10, 4)
    f = lambda o: [v for v in compute_verdicts(o) if v.scope_type == "country"][0].fraction
    assert f(more) >= f(base)


def test_verdict_silent_protocol_reported_when_listed():
    verdicts = compute_verdicts(_country_outcomes(10, 3), protocols=["dns_a", "tls_stateless"])
    by_proto = {v.protocol: v for v in verdicts if v.scope_type == "country"}
    assert by_proto["tls_stateless"].injected_count == 0
    assert by_proto["tls_stateless"].censoring is False


def test_verdict_threshold_validation():
    with pytest.raises(ValueError):
        compute_verdicts([], threshold=0.0)


def _verdict(cc, proto, ipv, frac, censoring, scope_type="country"):
    return Verdict(
        scope=cc, scope_type=scope_type, protocol=proto, ip_version=ipv,
        tested_count=30, injected_count=int(frac * 30), fraction=frac,
        censoring=censoring,
    )


def test_differential_categories():
    verdicts = [
        _verdict("TZ", "http_stateful", 4, 0.4, True),
        _verdict("TZ", "http_stateful", 6, 0.0, False),
        _verdict("CN", "dns_a", 4, 0.9, True),
        _verdict("CN", "dns_a", 6, 0.95, True),
        _verdict("RU", "tls_stateful", 4, 0.05, False),
        _verdict("RU", "tls_stateful", 6, 0.03, False),
        _verdict("XQ", "dns_a", 4, 0.1, False),
        _verdict("XQ", "dns_a", 6, 0.5, True),
    ]
    rows = {(r.country, r.protocol): r for r in differential_report(verdicts)}
    assert rows[("TZ", "http_stateful")].category == "v4-only"
    assert rows[("CN", "dns_a")].category == "both"
    assert rows[("RU", "tls_stateful")].category == "neither"
    assert rows[("XQ", "dns_a")].category == "v6-only"
    assert rows[("TZ", "http_stateful")].gap == pytest.approx(0.4)


def test_differential_indeterminate_counts_as_false():
    verdicts = [
        _verdict("XA", "dns_a", 4, 0.5, True),
        _verdict("XA", "dns_a", 6, 0.5, None),
    ]
    rows = differential_report(verdicts)
    assert rows[0].category == "v4-only"


def test_differential_ignores_asn_scopes():
    verdicts = [_verdict("AS1", "dns_a", 4, 0.5, True, scope_type="asn")]
    assert differential_report(verdicts) == []


def test_verdicts_csv_round_trip(tmp_path):
    verdicts = compute_verdicts(_country_outcomes(10, 3), protocols=["dns_a", "http_stateless"])
    path = tmp_path / "verdicts.csv"
    write_verdicts_csv(verdicts, path)
    assert load_verdicts_csv(path) == verdicts
    header = path.read_text().splitlines()[0]
    assert header == "scope,scope_type,protocol,ip_version,tested,injected,fraction,censoring"


def test_report_files_have_no_domain_column(tmp_path):
    verdicts = compute_verdicts(_country_outcomes(10, 3))
    write_verdicts_csv(verdicts, tmp_path / "verdicts.csv")
    write_differential_csv(differential_report(verdicts), tmp_path / "differential.csv")
    for name in ("verdicts.csv", "differential.csv"):
        assert "domain" not in (tmp_path / name).read_text().splitlines()[0]


def test_anomalies_jsonl(tmp_path):
    write_anomalies_jsonl([{"kind": "unknown_target"}], tmp_path / "anomalies.jsonl")
    assert '"unknown_target"' in (tmp_path / "anomalies.jsonl").read_text()


def test_figures_rendered(tmp_path):
    outcomes = _country_outcomes(12, 6) + _country_outcomes(12, 0, cc="XB", version=6)
    verdicts = compute_verdicts(outcomes, protocols=["dns_a"])
    rows = differential_report(verdicts)
    written = render_report_figures(verdicts, rows, tmp_path)
    names = {p.name for p in written}
    assert names == {"prevalence.png", "fractions.png"}
    for p in written:
        assert p.stat().st_size > 1000  # a real PNG, not an empty stub
