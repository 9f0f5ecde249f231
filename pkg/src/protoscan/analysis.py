"""Observation analysis: outcomes, verdicts, and the v4/v6 differential.

Verdicts are IP-level and scope-level only. Because residual censorship
can make an uncensored domain appear blocked, nothing here ever claims
that a specific domain is censored; the unit of evidence is "this IP
returned at least one tag-valid injection for protocol p".
"""

from __future__ import annotations

import csv
import json
from collections import Counter
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .engine.scan import ResponseObservation
from .targets import TargetAddress

DEFAULT_THRESHOLD = 0.20
DEFAULT_MIN_TESTED = 10

VERDICT_CSV_FIELDS = (
    "scope", "scope_type", "protocol", "ip_version",
    "tested", "injected", "fraction", "censoring",
)
DIFFERENTIAL_CSV_FIELDS = (
    "country", "protocol", "v4_fraction", "v6_fraction", "gap", "category",
)


@dataclass(frozen=True, slots=True)
class IpOutcome:
    addr: str
    country: str
    asn: int
    ip_version: int
    control_responsive: bool
    injected_protocols: frozenset[str]
    response_class_counts: Mapping[str, int]


@dataclass(frozen=True, slots=True)
class Verdict:
    scope: str
    scope_type: str  # "country" | "asn"
    protocol: str
    ip_version: int
    tested_count: int
    injected_count: int
    fraction: float
    censoring: bool | None  # None when tested_count < min_tested

    @property
    def censoring_label(self) -> str:
        if self.censoring is None:
            return "indeterminate"
        return "true" if self.censoring else "false"


@dataclass(frozen=True, slots=True)
class DifferentialRow:
    country: str
    protocol: str
    v4_fraction: float | None
    v6_fraction: float | None
    gap: float
    category: str  # both | v4-only | v6-only | neither


def fold_observations(
    observations: Iterable[ResponseObservation],
    control_set: set[str],
    targets: Sequence[TargetAddress],
    control_domains: frozenset[str] = frozenset(),
    probed_domains: frozenset[str] | None = None,
) -> tuple[list[IpOutcome], list[dict]]:
    """One outcome per target, plus an anomaly log.

    A target is injected for protocol p when at least one tag-valid
    non-control observation exists for p. Control-responsive targets
    (pre-identified in ``control_set`` or seen answering a control
    domain here) stay in the output but are excluded from every
    denominator downstream. Observations for unknown targets, and
    tag-valid observations for never-probed domains, are anomalies and
    are not counted.
    """
    by_addr = {t.addr: t for t in targets}
    injected: dict[str, set[str]] = {t.addr: set() for t in targets}
    counts: dict[str, Counter] = {t.addr: Counter() for t in targets}
    responsive = set(control_set)
    anomalies: list[dict] = []

    for obs in observations:
        target = by_addr.get(obs.target)
        if target is None:
            anomalies.append({"kind": "unknown_target", "observation": asdict(obs)})
            continue
        counts[obs.target][obs.response_class] += 1
        if not obs.valid_tag or obs.domain is None:
            continue
        if obs.domain in control_domains:
            responsive.add(obs.target)
            continue
        if probed_domains is not None and obs.domain not in probed_domains:
            anomalies.append({"kind": "unprobed_domain", "observation": asdict(obs)})
            continue
        injected[obs.target].add(obs.probe_protocol)

    outcomes = [
        IpOutcome(
            addr=t.addr,
            country=t.country,
            asn=t.origin_asn,
            ip_version=t.ip_version,
            control_responsive=t.addr in responsive,
            injected_protocols=frozenset(injected[t.addr]),
            response_class_counts=dict(counts[t.addr]),
        )
        for t in targets
    ]
    return outcomes, anomalies


def compute_verdicts(
    outcomes: Sequence[IpOutcome],
    threshold: float = DEFAULT_THRESHOLD,
    min_tested: int = DEFAULT_MIN_TESTED,
    protocols: Sequence[str] | None = None,
) -> list[Verdict]:
    """Per (country|AS, protocol, ip-version) censorship decisions.

    ``censoring`` uses a strict ``fraction > threshold`` comparison and
    is None (indeterminate) for scopes with fewer than ``min_tested``
    non-control-responsive targets. Pass the scanned protocol set so
    silent scopes still get explicit negative verdicts; otherwise only
    protocols seen in the outcomes are reported.
    """
    if not 0.0 < threshold < 1.0:
        raise ValueError(f"threshold {threshold} outside (0, 1)")
    if protocols is None:
        protocols = sorted({p for o in outcomes for p in o.injected_protocols})

    groups: dict[tuple[str, str, int], list[IpOutcome]] = {}
    for outcome in outcomes:
        for scope_type, scope in (
            ("country", outcome.country),
            ("asn", f"AS{outcome.asn}"),
        ):
            groups.setdefault((scope_type, scope, outcome.ip_version), []).append(outcome)

    verdicts = []
    for (scope_type, scope, ip_version), members in sorted(groups.items()):
        tested = [o for o in members if not o.control_responsive]
        for protocol in protocols:
            injected = sum(1 for o in tested if protocol in o.injected_protocols)
            fraction = injected / len(tested) if tested else 0.0
            censoring = fraction > threshold if len(tested) >= min_tested else None
            verdicts.append(
                Verdict(
                    scope=scope,
                    scope_type=scope_type,
                    protocol=protocol,
                    ip_version=ip_version,
                    tested_count=len(tested),
                    injected_count=injected,
                    fraction=fraction,
                    censoring=censoring,
                )
            )
    return verdicts


def differential_report(verdicts: Sequence[Verdict]) -> list[DifferentialRow]:
    """v4-versus-v6 comparison per (country, protocol).

    Category comes from the censoring booleans; indeterminate counts as
    not censoring. The gap is the v4 fraction minus the v6 fraction.
    """
    table: dict[tuple[str, str], dict[int, Verdict]] = {}
    for v in verdicts:
        if v.scope_type != "country":
            continue
        table.setdefault((v.scope, v.protocol), {})[v.ip_version] = v

    rows = []
    for (country, protocol), sides in sorted(table.items()):
        v4, v6 = sides.get(4), sides.get(6)
        c4 = bool(v4.censoring) if v4 else False
        c6 = bool(v6.censoring) if v6 else False
        category = {
            (True, True): "both",
            (True, False): "v4-only",
            (False, True): "v6-only",
            (False, False): "neither",
        }[(c4, c6)]
        rows.append(
            DifferentialRow(
                country=country,
                protocol=protocol,
                v4_fraction=v4.fraction if v4 else None,
                v6_fraction=v6.fraction if v6 else None,
                gap=(v4.fraction if v4 else 0.0) - (v6.fraction if v6 else 0.0),
                category=category,
            )
        )
    return rows


# --- report files ----------------------------------------------------------


def write_verdicts_csv(verdicts: Sequence[Verdict], path: Path | str) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(VERDICT_CSV_FIELDS)
        for v in verdicts:
            writer.writerow(
                [
                    v.scope, v.scope_type, v.protocol, v.ip_version,
                    v.tested_count, v.injected_count, f"{v.fraction:.6f}",
                    v.censoring_label,
                ]
            )


def write_differential_csv(rows: Sequence[DifferentialRow], path: Path | str) -> None:
    def fmt(x: float | None) -> str:
        return "" if x is None else f"{x:.6f}"

    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(DIFFERENTIAL_CSV_FIELDS)
        for r in rows:
            writer.writerow(
                [r.country, r.protocol, fmt(r.v4_fraction), fmt(r.v6_fraction),
                 f"{r.gap:+.6f}", r.category]
            )


def write_anomalies_jsonl(anomalies: Sequence[dict], path: Path | str) -> None:
    with open(path, "w") as f:
        for record in anomalies:
            f.write(json.dumps(record, separators=(",", ":")) + "\n")


def load_verdicts_csv(path: Path | str) -> list[Verdict]:
    out = []
    with open(path, newline="") as f:
        for row in csv.DictReader(f):
            censoring = {"true": True, "false": False, "indeterminate": None}[row["censoring"]]
            out.append(
                Verdict(
                    scope=row["scope"],
                    scope_type=row["scope_type"],
                    protocol=row["protocol"],
                    ip_version=int(row["ip_version"]),
                    tested_count=int(row["tested"]),
                    injected_count=int(row["injected"]),
                    fraction=float(row["fraction"]),
                    censoring=censoring,
                )
            )
    return out
