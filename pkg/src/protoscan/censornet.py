"""In-process simulated network with configurable censor middleboxes.

Models what the scanner cares about and nothing else: on-path injection
(RST, RST+ACK, HTTP block page, forged DNS answer), stateless versus
stateful triggering, per-IP-version coverage, live hosts that answer
everything, residual censorship windows, and probabilistic loss. It is
not a general network simulator: no routing, latency, or bandwidth.

A censor is direction-agnostic: it matches the domain extracted from a
packet (DNS qname, HTTP Host, or TLS SNI) whether the in-country address
is the destination or the source. Coverage is drawn per announced
prefix, stratified so the on-path fraction of a country's prefixes
equals the configured coverage to within one prefix.

Scenario files are JSON::

    {
      "seed": 1,
      "loss_rate": 0.0,
      "flow_window": 30.0,
      "countries": {
        "XA": {
          "blocklist": ["blocked.example"],
          "protocols": ["dns", "http", "tls"],
          "stateful_only": false,
          "ip_versions": [4, 6],
          "coverage": 1.0,
          "residual_window": 0.0,
          "injections": {
            "dns": {"action": "dns_answer", "rdata_v4": "198.51.100.99"},
            "http": {"action": "block_page", "marker": "restricted"},
            "tls": {"action": "rst_ack"}
          }
        }
      },
      "live_hosts": [{"addr": "192.0.2.77", "behavior": "http_answer_all"}]
    }
"""

from __future__ import annotations

import hashlib
import ipaddress
import json
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping

from .errors import ScenarioError
from .netcodec import (
    PacketLayers,
    TcpFlags,
    Transport,
    build_dns_answer,
    build_http_response,
    decode_dns,
    encode_dns,
    extract_host,
    extract_sni,
)
from .netcodec.http import is_http_request
from .targets import TargetAddress

PROTOCOLS = ("dns", "http", "tls")
INJECTION_KINDS = ("rst", "rst_ack", "block_page", "dns_answer")
LIVE_BEHAVIORS = ("tcp_rst_all", "http_answer_all", "dns_resolve_all")

DEFAULT_BLOCK_MARKER = "access to this resource is restricted by network policy"
_LIVE_RDATA = {4: "203.0.113.1", 6: "2001:db8:cafe::1"}


@dataclass(frozen=True, slots=True)
class InjectionAction:
    kind: str
    rdata_v4: str = "198.51.100.99"
    rdata_v6: str = "2001:db8:dead::1"
    marker: str = DEFAULT_BLOCK_MARKER

    def __post_init__(self) -> None:
        if self.kind not in INJECTION_KINDS:
            raise ScenarioError(f"unknown injection action {self.kind!r}")


_DEFAULT_INJECTIONS = {
    "dns": InjectionAction("dns_answer"),
    "http": InjectionAction("block_page"),
    "tls": InjectionAction("rst"),
}


@dataclass(frozen=True, slots=True)
class CensorPolicy:
    blocklist: frozenset[str]
    protocols: frozenset[str]
    stateful_only: bool = False
    ip_versions: frozenset[int] = frozenset((4, 6))
    coverage: float = 1.0
    residual_window: float = 0.0
    injections: Mapping[str, InjectionAction] = field(default_factory=lambda: dict(_DEFAULT_INJECTIONS))

    def __post_init__(self) -> None:
        if not 0.0 <= self.coverage <= 1.0:
            raise ScenarioError(f"coverage {self.coverage} outside [0, 1]")
        if self.protocols and not self.blocklist:
            raise ScenarioError("policy enables protocols but has an empty blocklist")
        unknown = self.protocols - set(PROTOCOLS)
        if unknown:
            raise ScenarioError(f"unknown protocols {sorted(unknown)}")

    def injection_for(self, protocol: str) -> InjectionAction:
        return self.injections.get(protocol) or _DEFAULT_INJECTIONS[protocol]


@dataclass(frozen=True, slots=True)
class LiveHost:
    addr: str
    behavior: str

    def __post_init__(self) -> None:
        if self.behavior not in LIVE_BEHAVIORS:
            raise ScenarioError(f"unknown live-host behavior {self.behavior!r}")


@dataclass(frozen=True, slots=True)
class NetworkScenario:
    countries: Mapping[str, CensorPolicy]
    live_hosts: tuple[LiveHost, ...] = ()
    loss_rate: float = 0.0
    rng_seed: int = 0
    flow_window: float = 30.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.loss_rate < 1.0:
            raise ScenarioError(f"loss_rate {self.loss_rate} outside [0, 1)")


def load_scenario(path: Path | str) -> NetworkScenario:
    try:
        raw = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ScenarioError(f"cannot load scenario {path}: {exc}") from None
    return scenario_from_dict(raw)


def scenario_from_dict(raw: dict) -> NetworkScenario:
    countries = {}
    for cc, spec in raw.get("countries", {}).items():
        injections = {
            proto: InjectionAction(
                kind=inj["action"],
                rdata_v4=inj.get("rdata_v4", InjectionAction("rst").rdata_v4),
                rdata_v6=inj.get("rdata_v6", InjectionAction("rst").rdata_v6),
                marker=inj.get("marker", DEFAULT_BLOCK_MARKER),
            )
            for proto, inj in spec.get("injections", {}).items()
        }
        countries[cc.upper()] = CensorPolicy(
            blocklist=frozenset(d.lower() for d in spec.get("blocklist", [])),
            protocols=frozenset(spec.get("protocols", [])),
            stateful_only=bool(spec.get("stateful_only", False)),
            ip_versions=frozenset(spec.get("ip_versions", [4, 6])),
            coverage=float(spec.get("coverage", 1.0)),
            residual_window=float(spec.get("residual_window", 0.0)),
            injections=injections or dict(_DEFAULT_INJECTIONS),
        )
    live = tuple(LiveHost(h["addr"], h["behavior"]) for h in raw.get("live_hosts", []))
    return NetworkScenario(
        countries=countries,
        live_hosts=live,
        loss_rate=float(raw.get("loss_rate", 0.0)),
        rng_seed=int(raw.get("seed", 0)),
        flow_window=float(raw.get("flow_window", 30.0)),
    )


def _rank(seed: int, country: str, prefix: str) -> int:
    return int.from_bytes(
        hashlib.sha256(f"{seed}|{country}|{prefix}".encode()).digest()[:8], "big"
    )


class CensorNetwork:
    """Scenario state: virtual clock, flow windows, residual entries, coverage."""

    def __init__(
        self,
        scenario: NetworkScenario,
        country_of: Callable[[str], str | None],
        prefix_of: Callable[[str], str | None] | None = None,
        prefixes_by_country: Mapping[str, Iterable[str]] | None = None,
    ):
        self.scenario = scenario
        self.country_of = country_of
        self.prefix_of = prefix_of or (lambda addr: None)
        self.now = 0.0
        self._rng = random.Random(scenario.rng_seed)
        self._flows: dict[tuple, float] = {}
        self._residual: dict[tuple[str, str], tuple[float, str]] = {}
        self._live = {h.addr: h.behavior for h in scenario.live_hosts}
        self._covered: dict[str, set[str]] = {}
        if prefixes_by_country:
            for cc, prefixes in prefixes_by_country.items():
                policy = scenario.countries.get(cc)
                if policy is None:
                    continue
                self._covered[cc] = self._assign_coverage(cc, policy.coverage, prefixes)

    @classmethod
    def for_targets(
        cls, scenario: NetworkScenario, targets: list[TargetAddress]
    ) -> "CensorNetwork":
        # keys must match decoded wire addresses, which are canonical
        countries = {str(ipaddress.ip_address(t.addr)): t.country for t in targets}
        prefixes = {str(ipaddress.ip_address(t.addr)): t.prefix for t in targets}
        by_country: dict[str, set[str]] = {}
        for t in targets:
            by_country.setdefault(t.country, set()).add(t.prefix)
        return cls(
            scenario,
            country_of=countries.get,
            prefix_of=prefixes.get,
            prefixes_by_country=by_country,
        )

    def _assign_coverage(
        self, country: str, coverage: float, prefixes: Iterable[str]
    ) -> set[str]:
        """Mark round(coverage * n) prefixes on-path, stratified per IP family."""
        seed = self.scenario.rng_seed
        covered: set[str] = set()
        for version in (4, 6):
            family = sorted(
                p for p in set(prefixes) if ipaddress.ip_network(p).version == version
            )
            if not family:
                continue
            family.sort(key=lambda p: _rank(seed, country, p))
            covered.update(family[: round(coverage * len(family))])
        return covered

    def covered_prefixes(self, country: str) -> set[str]:
        return set(self._covered.get(country, ()))

    def _on_path(self, country: str, policy: CensorPolicy, addr: str) -> bool:
        prefix = self.prefix_of(addr)
        if prefix is None:
            prefix = addr  # lone address acts as its own prefix
        if country in self._covered:
            return prefix in self._covered[country]
        # prefix outside the known universe: deterministic per-prefix draw
        return _rank(self.scenario.rng_seed, country, prefix) / 2**64 < policy.coverage

    def advance_time(self, duration: float) -> None:
        """Move the virtual clock; expire flow and residual state."""
        self.now += duration
        window = self.scenario.flow_window
        self._flows = {k: t for k, t in self._flows.items() if self.now - t <= window}
        self._residual = {
            k: (t, proto)
            for k, (t, proto) in self._residual.items()
            if self.now <= t
        }

    # --- packet handling --------------------------------------------------

    def deliver(self, packet: PacketLayers) -> list[PacketLayers]:
        """Push one packet into the network; return any response packets."""
        if self.scenario.loss_rate and self._rng.random() < self.scenario.loss_rate:
            return []

        if packet.transport is Transport.TCP and packet.tcp_flags & TcpFlags.SYN:
            key = (packet.src_addr, packet.dst_addr, packet.src_port, packet.dst_port)
            self._flows[key] = self.now

        injected = self._censor(packet)
        if injected is not None:
            return [injected]
        return self._live_host(packet)

    def _censor(self, packet: PacketLayers) -> PacketLayers | None:
        protocol, domain = self._extract(packet)
        for endpoint in (packet.dst_addr, packet.src_addr):
            country = self.country_of(endpoint)
            policy = self.scenario.countries.get(country) if country else None
            if policy is None:
                continue
            if not self._on_path(country, policy, endpoint):
                continue

            residual = self._residual.get((packet.src_addr, packet.dst_addr))
            if residual is not None and self.now <= residual[0] and packet.payload:
                if packet.transport is Transport.UDP and protocol != "dns":
                    continue  # nothing sensible to forge toward opaque UDP
                inject_proto = protocol or residual[1]
                return self._inject(packet, policy.injection_for(inject_proto), inject_proto)

            if protocol is None or domain is None:
                continue
            if protocol not in policy.protocols:
                continue
            if packet.ip_version not in policy.ip_versions:
                continue
            if domain not in policy.blocklist:
                continue
            if policy.stateful_only and protocol in ("http", "tls"):
                key = (packet.src_addr, packet.dst_addr, packet.src_port, packet.dst_port)
                seen = self._flows.get(key)
                if seen is None or self.now - seen > self.scenario.flow_window:
                    continue
            if policy.residual_window > 0:
                self._residual[(packet.src_addr, packet.dst_addr)] = (
                    self.now + policy.residual_window,
                    protocol,
                )
            return self._inject(packet, policy.injection_for(protocol), protocol)
        return None

    def _extract(self, packet: PacketLayers) -> tuple[str | None, str | None]:
        """(protocol, domain) the censor sees in this packet, if any."""
        if packet.transport is Transport.UDP:
            try:
                msg = decode_dns(packet.payload)
            except Exception:
                return None, None
            if msg.is_response or msg.question is None:
                return None, None
            return "dns", msg.question.qname.lower()
        if packet.transport is Transport.TCP and packet.payload:
            if is_http_request(packet.payload):
                host = extract_host(packet.payload)
                return "http", host
            sni = extract_sni(packet.payload)
            if sni is not None:
                return "tls", sni
        return None, None

    def _inject(
        self, packet: PacketLayers, action: InjectionAction, protocol: str
    ) -> PacketLayers:
        if packet.transport is Transport.UDP:
            # only a forged answer makes sense toward a UDP probe
            query = decode_dns(packet.payload)
            rdata = action.rdata_v4 if query.question.qtype == 1 else action.rdata_v6
            return self._reply(packet, payload=encode_dns(build_dns_answer(query, rdata)))
        if action.kind == "block_page":
            body = f"<html><body>{action.marker}</body></html>".encode()
            return self._reply(
                packet,
                flags=TcpFlags.PSH | TcpFlags.ACK,
                payload=build_http_response(200, "OK", body),
            )
        flags = TcpFlags.RST | TcpFlags.ACK if action.kind == "rst_ack" else TcpFlags.RST
        return self._reply(packet, flags=flags)

    def _reply(
        self,
        packet: PacketLayers,
        flags: TcpFlags = TcpFlags(0),
        payload: bytes = b"",
        ack_extra: int = 0,
    ) -> PacketLayers:
        """Response addressing: endpoints swapped, seq echoes the probe's ack."""
        if packet.transport is Transport.UDP:
            return PacketLayers(
                ip_version=packet.ip_version,
                src_addr=packet.dst_addr,
                dst_addr=packet.src_addr,
                transport=Transport.UDP,
                src_port=packet.dst_port,
                dst_port=packet.src_port,
                payload=payload,
            )
        return PacketLayers(
            ip_version=packet.ip_version,
            src_addr=packet.dst_addr,
            dst_addr=packet.src_addr,
            transport=Transport.TCP,
            src_port=packet.dst_port,
            dst_port=packet.src_port,
            tcp_flags=flags,
            seq=packet.ack & 0xFFFFFFFF,
            ack=(packet.seq + len(packet.payload) + ack_extra) & 0xFFFFFFFF,
            payload=payload,
        )

    def _live_host(self, packet: PacketLayers) -> list[PacketLayers]:
        behavior = self._live.get(packet.dst_addr)
        if behavior is None:
            return []
        if behavior == "tcp_rst_all" and packet.transport is Transport.TCP:
            bump = 1 if packet.tcp_flags & (TcpFlags.SYN | TcpFlags.FIN) else 0
            return [self._reply(packet, flags=TcpFlags.RST | TcpFlags.ACK, ack_extra=bump)]
        if behavior == "http_answer_all" and packet.transport is Transport.TCP:
            if is_http_request(packet.payload):
                body = b"<html><body>it works</body></html>"
                return [
                    self._reply(
                        packet,
                        flags=TcpFlags.PSH | TcpFlags.ACK,
                        payload=build_http_response(200, "OK", body),
                    )
                ]
            return []
        if behavior == "dns_resolve_all" and packet.transport is Transport.UDP:
            try:
                query = decode_dns(packet.payload)
            except Exception:
                return []
            if query.is_response or query.question is None:
                return []
            if query.question.qtype not in (1, 28):
                return []
            rdata = _LIVE_RDATA[4] if query.question.qtype == 1 else _LIVE_RDATA[6]
            return [self._reply(packet, payload=encode_dns(build_dns_answer(query, rdata)))]
        return []
