"""DNS message codec (RFC 1035 subset: queries plus A/AAAA answers).

The encoder writes plain length-prefixed labels and never emits name
compression; the decoder accepts compression pointers since injected
responses in the wild routinely use them.
"""

from __future__ import annotations

import enum
import ipaddress
import re
import struct
from dataclasses import dataclass

from ..errors import CodecError, InvalidHostname

FLAG_QR = 0x8000
FLAG_RD = 0x0100
FLAG_RA = 0x0080

CLASS_IN = 1

_LABEL_RE = re.compile(r"^[a-z0-9_]([a-z0-9_-]*[a-z0-9_])?$")
_MAX_POINTER_JUMPS = 32


class RecordType(enum.IntEnum):
    A = 1
    AAAA = 28


def validate_hostname(name: str) -> str:
    """Check label rules (each <= 63 bytes, total <= 253); return lowercased."""
    name = name.strip().rstrip(".").lower()
    if not name:
        raise InvalidHostname("empty hostname")
    if len(name) > 253:
        raise InvalidHostname(f"hostname too long ({len(name)} > 253): {name[:60]}...")
    for label in name.split("."):
        if len(label) > 63:
            raise InvalidHostname(f"label too long ({len(label)} > 63) in {name!r}")
        if not _LABEL_RE.match(label):
            raise InvalidHostname(f"bad label {label!r} in {name!r}")
    return name


@dataclass(frozen=True, slots=True)
class DnsQuestion:
    qname: str
    qtype: int
    qclass: int = CLASS_IN


@dataclass(frozen=True, slots=True)
class DnsRecord:
    name: str
    rtype: int
    ttl: int
    rdata: bytes

    def address(self) -> str | None:
        """Decode rdata as an IP address when the record is A/AAAA."""
        if self.rtype == RecordType.A and len(self.rdata) == 4:
            return str(ipaddress.IPv4Address(self.rdata))
        if self.rtype == RecordType.AAAA and len(self.rdata) == 16:
            return str(ipaddress.IPv6Address(self.rdata))
        return None


@dataclass(frozen=True, slots=True)
class DnsMessage:
    txid: int
    flags: int
    question: DnsQuestion | None
    answers: tuple[DnsRecord, ...] = ()

    @property
    def is_response(self) -> bool:
        return bool(self.flags & FLAG_QR)


def build_dns_query(domain: str, qtype: int, txid: int) -> DnsMessage:
    """A single-question query with recursion desired and no answers."""
    name = validate_hostname(domain)
    return DnsMessage(
        txid=txid & 0xFFFF,
        flags=FLAG_RD,
        question=DnsQuestion(qname=name, qtype=int(qtype)),
    )


def build_dns_answer(query: DnsMessage, rdata_addr: str, ttl: int = 300) -> DnsMessage:
    """A response to ``query`` answering its question with one address record.

    The rdata address family follows the question's qtype, not the
    address given: an A question gets 4-byte rdata, AAAA gets 16.
    """
    if query.question is None:
        raise CodecError("query has no question to answer")
    q = query.question
    ip = ipaddress.ip_address(rdata_addr)
    if q.qtype == RecordType.A and ip.version != 4:
        raise CodecError(f"A answer needs an IPv4 rdata, got {rdata_addr}")
    if q.qtype == RecordType.AAAA and ip.version != 6:
        raise CodecError(f"AAAA answer needs an IPv6 rdata, got {rdata_addr}")
    record = DnsRecord(name=q.qname, rtype=q.qtype, ttl=ttl, rdata=ip.packed)
    return DnsMessage(
        txid=query.txid,
        flags=FLAG_QR | FLAG_RD | FLAG_RA,
        question=q,
        answers=(record,),
    )


def _encode_name(name: str) -> bytes:
    out = bytearray()
    for label in name.split("."):
        raw = label.encode("ascii")
        if not 0 < len(raw) <= 63:
            raise CodecError(f"bad label length in {name!r}")
        out.append(len(raw))
        out += raw
    out.append(0)
    return bytes(out)


def encode_dns(msg: DnsMessage) -> bytes:
    qdcount = 1 if msg.question else 0
    out = bytearray(
        struct.pack("!HHHHHH", msg.txid, msg.flags, qdcount, len(msg.answers), 0, 0)
    )
    if msg.question:
        out += _encode_name(msg.question.qname)
        out += struct.pack("!HH", msg.question.qtype, msg.question.qclass)
    for rec in msg.answers:
        out += _encode_name(rec.name)
        out += struct.pack("!HHIH", rec.rtype, CLASS_IN, rec.ttl, len(rec.rdata))
        out += rec.rdata
    return bytes(out)


def _decode_name(data: bytes, offset: int) -> tuple[str, int]:
    """Read a possibly-compressed name; return (name, offset past it)."""
    labels: list[str] = []
    jumps = 0
    end = -1  # offset after the name in the original stream
    pos = offset
    while True:
        if pos >= len(data):
            raise CodecError("truncated DNS name")
        length = data[pos]
        if length & 0xC0 == 0xC0:
            if pos + 1 >= len(data):
                raise CodecError("truncated compression pointer")
            if end < 0:
                end = pos + 2
            pos = ((length & 0x3F) << 8) | data[pos + 1]
            jumps += 1
            if jumps > _MAX_POINTER_JUMPS:
                raise CodecError("compression pointer loop")
            continue
        if length == 0:
            if end < 0:
                end = pos + 1
            return ".".join(labels), end
        if pos + 1 + length > len(data):
            raise CodecError("truncated DNS label")
        labels.append(data[pos + 1 : pos + 1 + length].decode("ascii", "replace"))
        pos += 1 + length


def decode_dns(data: bytes) -> DnsMessage:
    if len(data) < 12:
        raise CodecError(f"DNS message too short: {len(data)} bytes")
    txid, flags, qdcount, ancount, nscount, arcount = struct.unpack("!HHHHHH", data[:12])
    offset = 12
    question: DnsQuestion | None = None
    for i in range(qdcount):
        qname, offset = _decode_name(data, offset)
        if offset + 4 > len(data):
            raise CodecError("truncated DNS question")
        qtype, qclass = struct.unpack("!HH", data[offset : offset + 4])
        offset += 4
        if i == 0:
            question = DnsQuestion(qname=qname, qtype=qtype, qclass=qclass)
    answers: list[DnsRecord] = []
    for _ in range(ancount):
        name, offset = _decode_name(data, offset)
        if offset + 10 > len(data):
            raise CodecError("truncated DNS record header")
        rtype, _rclass, ttl, rdlength = struct.unpack("!HHIH", data[offset : offset + 10])
        offset += 10
        if offset + rdlength > len(data):
            raise CodecError("truncated DNS rdata")
        answers.append(
            DnsRecord(name=name, rtype=rtype, ttl=ttl, rdata=data[offset : offset + rdlength])
        )
        offset += rdlength
    # authority/additional sections are not needed by the pipeline
    return DnsMessage(txid=txid, flags=flags, question=question, answers=tuple(answers))
