"""Scan target construction.

Pipeline: registry delegated-extended files -> allocations; keep only
organizations holding both IPv4 and IPv6 space; intersect with announced
BGP prefixes (most-specific containing allocation wins); sample N
addresses per announced prefix under a seeded, per-prefix RNG substream;
geolocate each address by longest-prefix match with the allocation
country as fallback.
"""

from __future__ import annotations

import csv
import hashlib
import ipaddress
import logging
import random
from dataclasses import dataclass, replace
from pathlib import Path

from .errors import AllocationError

log = logging.getLogger(__name__)

ERROR_BUDGET = 0.01  # malformed fraction tolerated per allocations file

TARGET_CSV_FIELDS = ("addr", "prefix", "asn", "org", "country", "ip_version")


@dataclass(frozen=True, slots=True)
class Allocation:
    registry: str
    country: str
    ip_version: int
    prefix: str
    org_id: str


@dataclass(frozen=True, slots=True)
class AnnouncedPrefix:
    prefix: str
    origin_asn: int


@dataclass(frozen=True, slots=True)
class TargetAddress:
    addr: str
    prefix: str
    origin_asn: int
    org_id: str
    country: str
    ip_version: int


def _v4_count_to_cidrs(start: str, count: int) -> list[str]:
    first = ipaddress.IPv4Address(start)
    last = ipaddress.IPv4Address(int(first) + count - 1)
    return [str(net) for net in ipaddress.summarize_address_range(first, last)]


def parse_allocations(path: Path | str) -> list[Allocation]:
    """Read a delegated-extended file: ``registry|cc|type|start|value|date|status|opaque-id``.

    Only ipv4/ipv6 rows with an opaque org id are consumed; asn rows,
    summary rows, headers, and unassigned (available/reserved) space are
    skipped. Malformed rows are logged and skipped until they exceed
    1% of the candidate rows, at which point the whole file is rejected.
    """
    path = Path(path)
    allocations: list[Allocation] = []
    bad: list[str] = []
    candidates = 0
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split("|")
        if len(fields) < 3 or fields[2] not in ("ipv4", "ipv6"):
            continue  # version header, asn rows, anything else
        if len(fields) > 1 and fields[1] == "*":
            continue  # summary row
        status = fields[6] if len(fields) > 6 else ""
        if status in ("available", "reserved"):
            continue  # unassigned space carries no organization
        candidates += 1
        try:
            allocations.extend(_parse_allocation_row(fields))
        except Exception as exc:
            bad.append(f"{path.name}:{lineno}: {exc}")
            log.warning("skipping malformed allocation row %s:%d: %s", path, lineno, exc)
    if candidates and len(bad) / candidates > ERROR_BUDGET:
        raise AllocationError(
            f"{path}: {len(bad)}/{candidates} malformed rows exceeds "
            f"{ERROR_BUDGET:.0%} budget; first: {bad[0]}"
        )
    return allocations


def _parse_allocation_row(fields: list[str]) -> list[Allocation]:
    if len(fields) < 8 or not fields[7]:
        raise ValueError("allocated row without opaque org id")
    registry, cc, kind, start, value = (f.strip() for f in fields[:5])
    org_id = fields[7].strip()
    if not cc or cc == "*":
        raise ValueError(f"bad country code {cc!r}")
    if kind == "ipv4":
        count = int(value)
        if count <= 0:
            raise ValueError(f"bad address count {value!r}")
        prefixes = _v4_count_to_cidrs(start, count)
        version = 4
    else:
        plen = int(value)
        net = ipaddress.ip_network(f"{start}/{plen}")
        if net.version != 6:
            raise ValueError(f"ipv6 row with IPv4 start {start!r}")
        prefixes = [str(net)]
        version = 6
    return [
        Allocation(registry=registry, country=cc.upper(), ip_version=version,
                   prefix=p, org_id=org_id)
        for p in prefixes
    ]


def filter_dual_stack(allocs: list[Allocation]) -> list[Allocation]:
    """Keep allocations whose org holds at least one v4 and one v6 block."""
    versions_by_org: dict[str, set[int]] = {}
    for a in allocs:
        versions_by_org.setdefault(a.org_id, set()).add(a.ip_version)
    return [a for a in allocs if versions_by_org[a.org_id] == {4, 6}]


def parse_announced(path: Path | str) -> list[AnnouncedPrefix]:
    """Read announced prefixes: ``prefix<TAB>origin-asn`` per line."""
    out = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        try:
            prefix, asn = line.split("\t")
            out.append(AnnouncedPrefix(str(ipaddress.ip_network(prefix)), int(asn)))
        except ValueError as exc:
            raise AllocationError(f"{path}:{lineno}: bad announced prefix row: {exc}") from None
    return out


def intersect_announced(
    allocs: list[Allocation], announced: list[AnnouncedPrefix]
) -> list[tuple[AnnouncedPrefix, Allocation]]:
    """Pair each announced prefix with the most specific allocation containing it."""
    table: dict[tuple[int, int, int], Allocation] = {}
    for a in allocs:
        net = ipaddress.ip_network(a.prefix)
        table.setdefault((net.version, int(net.network_address), net.prefixlen), a)
    pairs = []
    for ann in announced:
        net = ipaddress.ip_network(ann.prefix)
        maxbits = net.max_prefixlen
        base = int(net.network_address)
        for plen in range(net.prefixlen, -1, -1):
            masked = (base >> (maxbits - plen)) << (maxbits - plen) if plen else 0
            alloc = table.get((net.version, masked, plen))
            if alloc is not None:
                pairs.append((ann, alloc))
                break
    return pairs


def _substream_seed(seed: int, prefix: str) -> int:
    digest = hashlib.sha256(f"{seed}:{prefix}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


def _host_space(net: ipaddress.IPv4Network | ipaddress.IPv6Network) -> tuple[int, int]:
    """(first host as int, host count); v4 drops network/broadcast below /31."""
    lo = int(net.network_address)
    size = net.num_addresses
    if net.version == 4 and net.prefixlen < 31:
        return lo + 1, size - 2
    return lo, size


def sample_targets(
    pairs: list[tuple[AnnouncedPrefix, Allocation]], n: int, seed: int
) -> list[TargetAddress]:
    """min(n, host-count) distinct random addresses per announced prefix.

    Each prefix draws from its own RNG substream keyed on (seed, prefix),
    so the sample is reproducible and insensitive to prefix order. The
    combined result is deduplicated by address, first prefix wins.
    """
    if n < 1:
        raise ValueError(f"sample size must be >= 1, got {n}")
    targets: list[TargetAddress] = []
    seen: set[str] = set()
    for ann, alloc in pairs:
        net = ipaddress.ip_network(ann.prefix)
        lo, size = _host_space(net)
        k = min(n, size)
        rng = random.Random(_substream_seed(seed, ann.prefix))
        if k >= size:
            picks = range(lo, lo + size)
        elif size <= 1 << 32:
            picks = sorted(rng.sample(range(lo, lo + size), k))
        else:
            chosen: set[int] = set()
            while len(chosen) < k:
                chosen.add(lo + rng.randrange(size))
            picks = sorted(chosen)
        cls = ipaddress.IPv4Address if net.version == 4 else ipaddress.IPv6Address
        for value in picks:
            addr = str(cls(value))
            if addr not in seen:
                seen.add(addr)
                targets.append(
                    TargetAddress(
                        addr=addr,
                        prefix=ann.prefix,
                        origin_asn=ann.origin_asn,
                        org_id=alloc.org_id,
                        country=alloc.country,
                        ip_version=net.version,
                    )
                )
    return targets


class GeoTable:
    """Longest-prefix-match table from ``prefix,country`` CSV rows."""

    def __init__(self, rows: list[tuple[str, str]]):
        self._by_plen: dict[tuple[int, int], dict[int, str]] = {}
        for prefix, country in rows:
            net = ipaddress.ip_network(prefix)
            bucket = self._by_plen.setdefault((net.version, net.prefixlen), {})
            bucket[int(net.network_address)] = country.upper()
        self._plens = {
            4: sorted((p for v, p in self._by_plen if v == 4), reverse=True),
            6: sorted((p for v, p in self._by_plen if v == 6), reverse=True),
        }

    @classmethod
    def from_csv(cls, path: Path | str) -> "GeoTable":
        rows = []
        for raw in Path(path).read_text().splitlines():
            line = raw.strip()
            if not line or line.startswith("#") or line.lower().startswith("prefix,"):
                continue
            prefix, country = (f.strip() for f in line.split(",")[:2])
            rows.append((prefix, country))
        return cls(rows)

    def lookup(self, addr: str) -> str | None:
        ip = ipaddress.ip_address(addr)
        value = int(ip)
        maxbits = ip.max_prefixlen
        for plen in self._plens[ip.version]:
            masked = (value >> (maxbits - plen)) << (maxbits - plen) if plen else 0
            hit = self._by_plen[(ip.version, plen)].get(masked)
            if hit is not None:
                return hit
        return None


def geolocate(addr: str, geo_table: GeoTable, allocation_country: str) -> str:
    """Country of the longest matching geo prefix, else the allocation's."""
    return geo_table.lookup(addr) or allocation_country


def build_targets(
    allocations: list[Allocation],
    announced: list[AnnouncedPrefix],
    geo_table: GeoTable | None,
    n: int,
    seed: int,
) -> list[TargetAddress]:
    """Full pipeline from parsed inputs to the geolocated target set."""
    pairs = intersect_announced(filter_dual_stack(allocations), announced)
    targets = sample_targets(pairs, n, seed)
    if geo_table is None:
        return targets
    return [replace(t, country=geolocate(t.addr, geo_table, t.country)) for t in targets]


def write_targets_csv(targets: list[TargetAddress], path: Path | str) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(TARGET_CSV_FIELDS)
        for t in targets:
            writer.writerow([t.addr, t.prefix, t.origin_asn, t.org_id, t.country, t.ip_version])


def load_targets_csv(path: Path | str) -> list[TargetAddress]:
    out = []
    with open(path, newline="") as f:
        for row in csv.reader(f):
            if not row or row[0] == "addr" or row[0].startswith("#"):
                continue
            addr, prefix, asn, org, country, ip_version = row
            out.append(
                TargetAddress(
                    addr=str(ipaddress.ip_address(addr)),
                    prefix=str(ipaddress.ip_network(prefix)),
                    origin_asn=int(asn),
                    org_id=org,
                    country=country,
                    ip_version=int(ip_version),
                )
            )
    return out
