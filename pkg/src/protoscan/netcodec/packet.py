"""IPv4/IPv6 + TCP/UDP packet encoder/decoder.

Codecs operate at the IP layer (no Ethernet framing) and are bit-exact:
every encoded packet carries valid length fields and checksums, and
``decode_packet(encode_packet(x)) == x`` field-for-field. Header fields
that are not part of :class:`PacketLayers` (TTL, IPv4 identification,
TCP window) are fixed constants so the byte image is deterministic.
"""

from __future__ import annotations

import enum
import ipaddress
import struct
from dataclasses import dataclass, field

from ..errors import CodecError

IPV4_HEADER_LEN = 20
IPV6_HEADER_LEN = 40
TCP_HEADER_LEN = 20
UDP_HEADER_LEN = 8

_TTL = 64
_TCP_WINDOW = 0xFAF0

_PROTO_TCP = 6
_PROTO_UDP = 17


class Transport(enum.Enum):
    TCP = "tcp"
    UDP = "udp"
    # Produced by the decoder for next-protocol values it does not parse;
    # the raw transport bytes are kept as the payload.
    OTHER = "other"


class TcpFlags(enum.IntFlag):
    FIN = 0x01
    SYN = 0x02
    RST = 0x04
    PSH = 0x08
    ACK = 0x10
    URG = 0x20
    ECE = 0x40
    CWR = 0x80


@dataclass(frozen=True, slots=True)
class PacketLayers:
    """One packet, transport layer and below, in field form.

    ``ip_checksum_ok`` / ``transport_checksum_ok`` are populated by the
    decoder only and excluded from equality, so round-trip comparisons
    see just the wire-relevant fields. For UDP packets the TCP fields
    (``tcp_flags``, ``seq``, ``ack``) are zero.
    """

    ip_version: int
    src_addr: str
    dst_addr: str
    transport: Transport
    src_port: int
    dst_port: int
    tcp_flags: TcpFlags = TcpFlags(0)
    seq: int = 0
    ack: int = 0
    payload: bytes = b""
    ip_checksum_ok: bool | None = field(default=None, compare=False)
    transport_checksum_ok: bool | None = field(default=None, compare=False)


def ones_complement_sum(data: bytes) -> int:
    """16-bit one's-complement sum with end-around carry (RFC 1071)."""
    if len(data) % 2:
        data += b"\x00"
    total = sum(struct.unpack("!%dH" % (len(data) // 2), data))
    while total >> 16:
        total = (total & 0xFFFF) + (total >> 16)
    return total


def inet_checksum(data: bytes) -> int:
    return ~ones_complement_sum(data) & 0xFFFF


def _pseudo_header(src: bytes, dst: bytes, proto: int, length: int, version: int) -> bytes:
    if version == 4:
        return src + dst + struct.pack("!BBH", 0, proto, length)
    return src + dst + struct.pack("!IHBB", length, 0, 0, proto)


def _parse_addr(addr: str, expected_version: int):
    try:
        ip = ipaddress.ip_address(addr)
    except ValueError as exc:
        raise CodecError(f"bad address {addr!r}: {exc}") from None
    if ip.version != expected_version:
        raise CodecError(
            f"address {addr} is IPv{ip.version}, packet declares IPv{expected_version}"
        )
    return ip


def encode_packet(layers: PacketLayers) -> bytes:
    """Serialize to wire bytes with correct lengths and checksums."""
    if layers.ip_version not in (4, 6):
        raise CodecError(f"unsupported IP version {layers.ip_version}")
    if layers.transport not in (Transport.TCP, Transport.UDP):
        raise CodecError(f"cannot encode transport {layers.transport}")
    src = _parse_addr(layers.src_addr, layers.ip_version).packed
    dst = _parse_addr(layers.dst_addr, layers.ip_version).packed

    transport_hdr = TCP_HEADER_LEN if layers.transport is Transport.TCP else UDP_HEADER_LEN
    ip_hdr = IPV4_HEADER_LEN if layers.ip_version == 4 else 0  # v6 limit is on the payload
    if ip_hdr + transport_hdr + len(layers.payload) > 0xFFFF:
        raise CodecError(
            f"payload of {len(layers.payload)} bytes overflows the 16-bit length field"
        )

    if layers.transport is Transport.TCP:
        segment = _encode_tcp(layers, src, dst)
        proto = _PROTO_TCP
    else:
        segment = _encode_udp(layers, src, dst)
        proto = _PROTO_UDP

    if layers.ip_version == 4:
        # version/IHL, TOS, total length, ident 0, DF, TTL, proto, checksum, addrs
        header = struct.pack(
            "!BBHHHBBH4s4s",
            0x45, 0, IPV4_HEADER_LEN + len(segment), 0, 0x4000, _TTL, proto, 0, src, dst,
        )
        csum = inet_checksum(header)
        return header[:10] + struct.pack("!H", csum) + header[12:] + segment

    header = struct.pack("!IHBB", 0x60000000, len(segment), proto, _TTL) + src + dst
    return header + segment


def _encode_tcp(layers: PacketLayers, src: bytes, dst: bytes) -> bytes:
    header = struct.pack(
        "!HHIIHHHH",
        layers.src_port,
        layers.dst_port,
        layers.seq & 0xFFFFFFFF,
        layers.ack & 0xFFFFFFFF,
        (5 << 12) | int(layers.tcp_flags),
        _TCP_WINDOW,
        0,
        0,
    )
    segment = header + layers.payload
    pseudo = _pseudo_header(src, dst, _PROTO_TCP, len(segment), layers.ip_version)
    csum = inet_checksum(pseudo + segment)
    return segment[:16] + struct.pack("!H", csum) + segment[18:]


def _encode_udp(layers: PacketLayers, src: bytes, dst: bytes) -> bytes:
    length = UDP_HEADER_LEN + len(layers.payload)
    header = struct.pack("!HHHH", layers.src_port, layers.dst_port, length, 0)
    segment = header + layers.payload
    pseudo = _pseudo_header(src, dst, _PROTO_UDP, length, layers.ip_version)
    csum = inet_checksum(pseudo + segment)
    if csum == 0:
        csum = 0xFFFF  # zero means "no checksum" on the wire
    return segment[:6] + struct.pack("!H", csum) + segment[8:]


def decode_packet(data: bytes) -> PacketLayers:
    """Parse wire bytes back into layers, flagging checksum validity.

    Unknown transports come back as ``Transport.OTHER`` with the raw
    transport bytes kept as the payload.
    """
    if len(data) < 1:
        raise CodecError("empty packet")
    version = data[0] >> 4
    if version == 4:
        return _decode_ipv4(data)
    if version == 6:
        return _decode_ipv6(data)
    raise CodecError(f"unsupported IP version {version}")


def _decode_ipv4(data: bytes) -> PacketLayers:
    if len(data) < IPV4_HEADER_LEN:
        raise CodecError(f"truncated IPv4 header: {len(data)} bytes")
    ihl = (data[0] & 0x0F) * 4
    if ihl < IPV4_HEADER_LEN or len(data) < ihl:
        raise CodecError("truncated IPv4 header options")
    total_len = struct.unpack("!H", data[2:4])[0]
    if total_len < ihl or total_len > len(data):
        raise CodecError(f"IPv4 total length {total_len} inconsistent with {len(data)} bytes")
    proto = data[9]
    src = str(ipaddress.IPv4Address(data[12:16]))
    dst = str(ipaddress.IPv4Address(data[16:20]))
    ip_ok = ones_complement_sum(data[:ihl]) == 0xFFFF
    return _decode_transport(
        4, src, dst, proto, data[12:16], data[16:20], data[ihl:total_len], ip_ok
    )


def _decode_ipv6(data: bytes) -> PacketLayers:
    if len(data) < IPV6_HEADER_LEN:
        raise CodecError(f"truncated IPv6 header: {len(data)} bytes")
    payload_len = struct.unpack("!H", data[4:6])[0]
    if IPV6_HEADER_LEN + payload_len > len(data):
        raise CodecError("IPv6 payload length exceeds packet")
    proto = data[6]
    src_b, dst_b = data[8:24], data[24:40]
    src = str(ipaddress.IPv6Address(src_b))
    dst = str(ipaddress.IPv6Address(dst_b))
    segment = data[IPV6_HEADER_LEN : IPV6_HEADER_LEN + payload_len]
    return _decode_transport(6, src, dst, proto, src_b, dst_b, segment, None)


def _decode_transport(
    version: int,
    src: str,
    dst: str,
    proto: int,
    src_b: bytes,
    dst_b: bytes,
    segment: bytes,
    ip_ok: bool | None,
) -> PacketLayers:
    if proto == _PROTO_TCP:
        if len(segment) < TCP_HEADER_LEN:
            raise CodecError(f"truncated TCP header: {len(segment)} bytes")
        src_port, dst_port, seq, ack, off_flags = struct.unpack("!HHIIH", segment[:14])
        doff = (off_flags >> 12) * 4
        if doff < TCP_HEADER_LEN or doff > len(segment):
            raise CodecError("bad TCP data offset")
        pseudo = _pseudo_header(src_b, dst_b, _PROTO_TCP, len(segment), version)
        t_ok = ones_complement_sum(pseudo + segment) == 0xFFFF
        return PacketLayers(
            ip_version=version,
            src_addr=src,
            dst_addr=dst,
            transport=Transport.TCP,
            src_port=src_port,
            dst_port=dst_port,
            tcp_flags=TcpFlags(off_flags & 0xFF),
            seq=seq,
            ack=ack,
            payload=segment[doff:],
            ip_checksum_ok=ip_ok,
            transport_checksum_ok=t_ok,
        )
    if proto == _PROTO_UDP:
        if len(segment) < UDP_HEADER_LEN:
            raise CodecError(f"truncated UDP header: {len(segment)} bytes")
        src_port, dst_port, length, csum = struct.unpack("!HHHH", segment[:8])
        if length < UDP_HEADER_LEN or length > len(segment):
            raise CodecError("bad UDP length")
        if csum == 0 and version == 4:
            t_ok = True  # checksum optional over IPv4
        else:
            pseudo = _pseudo_header(src_b, dst_b, _PROTO_UDP, length, version)
            t_ok = ones_complement_sum(pseudo + segment[:length]) == 0xFFFF
        return PacketLayers(
            ip_version=version,
            src_addr=src,
            dst_addr=dst,
            transport=Transport.UDP,
            src_port=src_port,
            dst_port=dst_port,
            payload=segment[UDP_HEADER_LEN:length],
            ip_checksum_ok=ip_ok,
            transport_checksum_ok=t_ok,
        )
    return PacketLayers(
        ip_version=version,
        src_addr=src,
        dst_addr=dst,
        transport=Transport.OTHER,
        src_port=0,
        dst_port=0,
        payload=segment,
        ip_checksum_ok=ip_ok,
        transport_checksum_ok=None,
    )
