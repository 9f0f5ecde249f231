"""Stateless probe tagging.

Each domain gets a unique source port from [1000, 65535]; the TCP
acknowledgement number of every outgoing probe is the CRC-32 of that
port and the target address. An inbound packet then identifies its
probe with no per-connection state: the destination port names the
domain, and the sequence number must satisfy

    seq == crc32(port, addr)   or   seq - payload_len == crc32(port, addr)

(both readings of the length term are accepted and the matching arm is
recorded). DNS probes instead reuse the tag port as the query txid, so
a UDP response validates when its question name matches the mapped
domain and it echoes the txid.
"""

from __future__ import annotations

import csv
import ipaddress
import random
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

from .domains import DomainList
from .errors import TagSpaceError
from .netcodec import Transport, decode_dns
from .netcodec.packet import PacketLayers

PORT_MIN = 1000
PORT_MAX = 65535
PORT_SPACE = PORT_MAX - PORT_MIN + 1


def crc32_iso_hdlc(data: bytes) -> int:
    """CRC-32/ISO-HDLC (poly 0x04C11DB7 reflected, init/xorout 0xFFFFFFFF)."""
    return zlib.crc32(data) & 0xFFFFFFFF


def derive_ack(src_port: int, target: str) -> int:
    """Tag value: CRC-32 over the port (2 bytes BE) and the packed address."""
    addr = ipaddress.ip_address(target)
    return crc32_iso_hdlc(src_port.to_bytes(2, "big") + addr.packed)


@dataclass(frozen=True, slots=True)
class TagMap:
    domain_to_port: Mapping[str, int]
    port_to_domain: Mapping[int, str]

    def __len__(self) -> int:
        return len(self.domain_to_port)

    def port_for(self, domain: str) -> int:
        return self.domain_to_port[domain]

    def to_csv(self, path: Path | str) -> None:
        with open(path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["domain", "port"])
            for domain, port in self.domain_to_port.items():
                writer.writerow([domain, port])

    @classmethod
    def from_csv(cls, path: Path | str) -> "TagMap":
        fwd: dict[str, int] = {}
        with open(path, newline="") as f:
            for row in csv.reader(f):
                if not row or row[0] == "domain":
                    continue
                fwd[row[0]] = int(row[1])
        return cls(domain_to_port=fwd, port_to_domain={p: d for d, p in fwd.items()})


def build_tag_map(domains: DomainList, seed: int) -> TagMap:
    """Injective domain->port assignment via a seeded draw from the port range."""
    names = domains.all_domains()
    if len(names) > PORT_SPACE:
        raise TagSpaceError(
            f"{len(names)} domains exceed the {PORT_SPACE}-port tag space"
        )
    rng = random.Random(seed)
    ports = rng.sample(range(PORT_MIN, PORT_MAX + 1), len(names))
    fwd = dict(zip(names, ports))
    return TagMap(domain_to_port=fwd, port_to_domain={p: d for d, p in fwd.items()})


@dataclass(frozen=True, slots=True)
class TagValidation:
    matched_domain: str | None
    target: str
    valid: bool
    seq_delta: int
    reason: str = ""
    matched_arm: str | None = None  # "seq_exact" | "seq_minus_len"


def validate_response(inbound: PacketLayers, tags: TagMap) -> TagValidation:
    """Check an inbound packet against the tag scheme.

    The packet's destination port was our source port; its source
    address is the probed target. Never raises: unmatched or
    inconsistent packets come back with ``valid=False`` and a reason.
    """
    target = inbound.src_addr
    domain = tags.port_to_domain.get(inbound.dst_port)
    if domain is None:
        return TagValidation(None, target, False, 0, reason="unmapped port")

    if inbound.transport is Transport.TCP:
        expected = derive_ack(inbound.dst_port, target)
        delta = inbound.seq - expected
        if delta == 0:
            return TagValidation(domain, target, True, 0, matched_arm="seq_exact")
        if delta == len(inbound.payload):
            return TagValidation(
                domain, target, True, delta, matched_arm="seq_minus_len"
            )
        return TagValidation(domain, target, False, delta, reason="seq mismatch")

    if inbound.transport is Transport.UDP:
        try:
            msg = decode_dns(inbound.payload)
        except Exception:
            return TagValidation(domain, target, False, 0, reason="undecodable DNS")
        if msg.question is None or msg.question.qname != domain:
            return TagValidation(domain, target, False, 0, reason="qname mismatch")
        if msg.txid != inbound.dst_port & 0xFFFF:
            return TagValidation(domain, target, False, 0, reason="txid mismatch")
        return TagValidation(domain, target, True, 0, matched_arm="dns")

    return TagValidation(domain, target, False, 0, reason="opaque transport")
