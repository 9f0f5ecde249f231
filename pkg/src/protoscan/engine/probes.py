"""Probe construction: one (protocol, domain, target) -> tagged packets."""

from __future__ import annotations

import enum
import random
from dataclasses import dataclass

from ..errors import ProtoscanError
from ..netcodec import (
    PacketLayers,
    RecordType,
    TcpFlags,
    Transport,
    build_dns_query,
    build_http_probe,
    build_tls_client_hello,
    encode_dns,
)
from ..tagging import TagMap, derive_ack
from ..targets import TargetAddress


class ProbeProtocol(enum.Enum):
    DNS_A = "dns_a"
    DNS_AAAA = "dns_aaaa"
    HTTP_STATELESS = "http_stateless"
    HTTP_STATEFUL = "http_stateful"
    TLS_STATELESS = "tls_stateless"
    TLS_STATEFUL = "tls_stateful"

    @property
    def family(self) -> str:
        return self.value.split("_")[0]

    @property
    def stateful(self) -> bool:
        return self.value.endswith("_stateful")

    @property
    def dst_port(self) -> int:
        return {"dns": 53, "http": 80, "tls": 443}[self.family]


def parse_protocols(families: str, stateful: str) -> tuple[ProbeProtocol, ...]:
    """Expand ``dns,http,tls`` x ``stateless|stateful|both`` into probe types."""
    if stateful not in ("stateless", "stateful", "both"):
        raise ProtoscanError(f"bad statefulness selector {stateful!r}")
    out: list[ProbeProtocol] = []
    for family in (f.strip().lower() for f in families.split(",") if f.strip()):
        if family == "dns":
            out += [ProbeProtocol.DNS_A, ProbeProtocol.DNS_AAAA]
        elif family in ("http", "tls"):
            if stateful in ("stateless", "both"):
                out.append(ProbeProtocol[f"{family.upper()}_STATELESS"])
            if stateful in ("stateful", "both"):
                out.append(ProbeProtocol[f"{family.upper()}_STATEFUL"])
        else:
            raise ProtoscanError(f"unknown protocol family {family!r}")
    if not out:
        raise ProtoscanError("empty protocol set")
    return tuple(out)


@dataclass(frozen=True, slots=True)
class ProbeSpec:
    protocol: ProbeProtocol
    domain: str
    target: TargetAddress


def emit_probe(
    spec: ProbeSpec, tags: TagMap, rng: random.Random, src_addr: str
) -> list[PacketLayers]:
    """Packets for one probe, all sharing the domain's tag port.

    DNS: one UDP query whose txid is the tag port. Stateless HTTP/TLS:
    one PSH+ACK with random sequence number. Stateful HTTP/TLS: a faked
    client-side handshake, SYN / ACK / PSH+ACK, with consistent sequence
    numbers. Every TCP packet's ack is the CRC tag for (port, target).
    """
    port = tags.port_for(spec.domain)
    target = spec.target.addr
    version = spec.target.ip_version
    proto = spec.protocol

    if proto.family == "dns":
        qtype = RecordType.A if proto is ProbeProtocol.DNS_A else RecordType.AAAA
        query = build_dns_query(spec.domain, qtype, txid=port)
        return [
            PacketLayers(
                ip_version=version,
                src_addr=src_addr,
                dst_addr=target,
                transport=Transport.UDP,
                src_port=port,
                dst_port=proto.dst_port,
                payload=encode_dns(query),
            )
        ]

    if proto.family == "http":
        payload = build_http_probe(spec.domain)
    elif proto.family == "tls":
        payload = build_tls_client_hello(spec.domain, rng.randbytes(32))
    else:
        raise ProtoscanError(f"unknown probe protocol {proto}")

    ack = derive_ack(port, target)

    def tcp(flags: TcpFlags, seq: int, data: bytes = b"") -> PacketLayers:
        return PacketLayers(
            ip_version=version,
            src_addr=src_addr,
            dst_addr=target,
            transport=Transport.TCP,
            src_port=port,
            dst_port=proto.dst_port,
            tcp_flags=flags,
            seq=seq & 0xFFFFFFFF,
            ack=ack,
            payload=data,
        )

    s0 = rng.getrandbits(32)
    if not proto.stateful:
        return [tcp(TcpFlags.PSH | TcpFlags.ACK, s0, payload)]
    return [
        tcp(TcpFlags.SYN, s0),
        tcp(TcpFlags.ACK, s0 + 1),
        tcp(TcpFlags.PSH | TcpFlags.ACK, s0 + 1, payload),
    ]
