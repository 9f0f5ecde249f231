"""Response payload taxonomy.

``classify_payload`` looks only at payload bytes: the flag-only classes
(RST, RST_ACK) are assigned by the ingest path from TCP flags, never
here. It is total and deterministic — anything unrecognized is OTHER.
"""

from __future__ import annotations

import enum

from . import dns, http, tls
from .packet import Transport


class ResponseClass(enum.Enum):
    RST = "rst"
    RST_ACK = "rst_ack"
    DNS_ANSWER = "dns_answer"
    HTTP_RESPONSE = "http_response"
    TLS_RECORD = "tls_record"
    EMPTY = "empty"
    OTHER = "other"


def classify_payload(payload: bytes, transport: Transport) -> ResponseClass:
    if not payload:
        return ResponseClass.EMPTY
    if transport is Transport.UDP:
        try:
            msg = dns.decode_dns(payload)
        except Exception:
            return ResponseClass.OTHER
        return ResponseClass.DNS_ANSWER if msg.is_response else ResponseClass.OTHER
    if transport is Transport.TCP:
        if http.is_http_response(payload):
            return ResponseClass.HTTP_RESPONSE
        if tls.looks_like_tls_record(payload):
            return ResponseClass.TLS_RECORD
    return ResponseClass.OTHER
