"""Bit-exact wire codecs: IP/TCP/UDP framing, DNS, HTTP, TLS ClientHello.

All functions here are pure over immutable inputs and safe to call from
any number of workers.
"""

from .classify import ResponseClass, classify_payload
from .dns import (
    DnsMessage,
    DnsQuestion,
    DnsRecord,
    RecordType,
    build_dns_answer,
    build_dns_query,
    decode_dns,
    encode_dns,
    validate_hostname,
)
from .http import build_http_probe, build_http_response, extract_host
from .packet import (
    PacketLayers,
    TcpFlags,
    Transport,
    decode_packet,
    encode_packet,
    inet_checksum,
    ones_complement_sum,
)
from .tls import build_tls_client_hello, extract_sni

__all__ = [
    "DnsMessage",
    "DnsQuestion",
    "DnsRecord",
    "PacketLayers",
    "RecordType",
    "ResponseClass",
    "TcpFlags",
    "Transport",
    "build_dns_answer",
    "build_dns_query",
    "build_http_probe",
    "build_http_response",
    "build_tls_client_hello",
    "classify_payload",
    "decode_dns",
    "decode_packet",
    "encode_dns",
    "encode_packet",
    "extract_host",
    "extract_sni",
    "inet_checksum",
    "ones_complement_sum",
    "validate_hostname",
]
