"""TLS ClientHello builder and SNI extractor.

The fingerprint is intentionally fixed: TLS 1.2 record and handshake
versions, a short static cipher list, and three extensions
(server_name, supported_groups, signature_algorithms). Output is
byte-deterministic given (domain, random), which is what the golden
tests and the simulator rely on; the exact fingerprint is otherwise
immaterial to the pipeline.
"""

from __future__ import annotations

import struct

from ..errors import CodecError
from .dns import validate_hostname

RECORD_HANDSHAKE = 22
HANDSHAKE_CLIENT_HELLO = 1
_VERSION_TLS12 = 0x0303

_CIPHER_SUITES = (
    0x1301,  # TLS_AES_128_GCM_SHA256
    0x1302,  # TLS_AES_256_GCM_SHA384
    0xC02B,  # ECDHE-ECDSA-AES128-GCM-SHA256
    0xC02F,  # ECDHE-RSA-AES128-GCM-SHA256
    0x009C,  # RSA-AES128-GCM-SHA256
)
_SUPPORTED_GROUPS = (0x001D, 0x0017, 0x0018)  # x25519, secp256r1, secp384r1
_SIGNATURE_ALGS = (0x0403, 0x0804, 0x0401)  # ecdsa-p256, rsa-pss-sha256, rsa-pkcs1-sha256

EXT_SERVER_NAME = 0
EXT_SUPPORTED_GROUPS = 10
EXT_SIGNATURE_ALGS = 13


def _extension(ext_type: int, body: bytes) -> bytes:
    return struct.pack("!HH", ext_type, len(body)) + body


def _sni_extension(host: bytes) -> bytes:
    # server_name_list: one entry of type host_name (0)
    entry = struct.pack("!BH", 0, len(host)) + host
    return _extension(EXT_SERVER_NAME, struct.pack("!H", len(entry)) + entry)


def _u16_list_extension(ext_type: int, values: tuple[int, ...]) -> bytes:
    packed = b"".join(struct.pack("!H", v) for v in values)
    return _extension(ext_type, struct.pack("!H", len(packed)) + packed)


def build_tls_client_hello(domain: str, random: bytes, session_id: bytes = b"") -> bytes:
    """Full handshake record (content type 22) with SNI == domain."""
    name = validate_hostname(domain)
    if len(random) != 32:
        raise CodecError(f"ClientHello random must be 32 bytes, got {len(random)}")
    if len(session_id) > 32:
        raise CodecError("session_id longer than 32 bytes")

    ciphers = b"".join(struct.pack("!H", c) for c in _CIPHER_SUITES)
    extensions = (
        _sni_extension(name.encode("ascii"))
        + _u16_list_extension(EXT_SUPPORTED_GROUPS, _SUPPORTED_GROUPS)
        + _u16_list_extension(EXT_SIGNATURE_ALGS, _SIGNATURE_ALGS)
    )
    body = (
        struct.pack("!H", _VERSION_TLS12)
        + random
        + struct.pack("!B", len(session_id))
        + session_id
        + struct.pack("!H", len(ciphers))
        + ciphers
        + b"\x01\x00"  # null compression only
        + struct.pack("!H", len(extensions))
        + extensions
    )
    handshake = struct.pack("!B", HANDSHAKE_CLIENT_HELLO) + len(body).to_bytes(3, "big") + body
    return struct.pack("!BHH", RECORD_HANDSHAKE, _VERSION_TLS12, len(handshake)) + handshake


def extract_sni(record: bytes) -> str | None:
    """Server name from a ClientHello record; None when absent/not a hello."""
    try:
        if len(record) < 5 or record[0] != RECORD_HANDSHAKE:
            return None
        record_len = struct.unpack("!H", record[3:5])[0]
        hs = record[5 : 5 + record_len]
        if len(hs) < 4 or hs[0] != HANDSHAKE_CLIENT_HELLO:
            return None
        body = hs[4 : 4 + int.from_bytes(hs[1:4], "big")]
        pos = 2 + 32  # client_version + random
        sid_len = body[pos]
        pos += 1 + sid_len
        cipher_len = struct.unpack("!H", body[pos : pos + 2])[0]
        pos += 2 + cipher_len
        comp_len = body[pos]
        pos += 1 + comp_len
        ext_total = struct.unpack("!H", body[pos : pos + 2])[0]
        pos += 2
        ext_end = pos + ext_total
        while pos + 4 <= ext_end:
            ext_type, ext_len = struct.unpack("!HH", body[pos : pos + 4])
            pos += 4
            ext = body[pos : pos + ext_len]
            pos += ext_len
            if ext_type != EXT_SERVER_NAME or len(ext) < 5:
                continue
            if ext[2] != 0:  # host_name entry type
                continue
            name_len = struct.unpack("!H", ext[3:5])[0]
            return ext[5 : 5 + name_len].decode("ascii", "replace").lower()
        return None
    except (IndexError, struct.error):
        return None


def looks_like_tls_record(payload: bytes) -> bool:
    """Plausible TLS record: known content type and a 3.x version byte."""
    return (
        len(payload) >= 5
        and payload[0] in (20, 21, 22, 23)
        and payload[1] == 3
        and payload[2] <= 4
    )
