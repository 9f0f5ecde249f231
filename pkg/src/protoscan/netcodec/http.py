"""HTTP/1.1 probe builder and minimal request/response readers."""

from __future__ import annotations

from .dns import validate_hostname


def build_http_probe(domain: str) -> bytes:
    """``GET / HTTP/1.1`` with the domain as the sole Host header."""
    name = validate_hostname(domain)
    return (
        f"GET / HTTP/1.1\r\nHost: {name}\r\nConnection: close\r\n\r\n"
    ).encode("ascii")


def extract_host(payload: bytes) -> str | None:
    """Host header value from a request payload, lowercased; None if absent."""
    head = payload.split(b"\r\n\r\n", 1)[0]
    for line in head.split(b"\r\n")[1:]:
        name, sep, value = line.partition(b":")
        if sep and name.strip().lower() == b"host":
            host = value.strip().decode("ascii", "replace").lower()
            return host.rsplit(":", 1)[0] if ":" in host else host
    return None


def is_http_request(payload: bytes) -> bool:
    return payload.startswith((b"GET ", b"POST ", b"HEAD ", b"PUT ", b"OPTIONS "))


def is_http_response(payload: bytes) -> bool:
    return payload.startswith(b"HTTP/")


def build_http_response(status: int, reason: str, body: bytes) -> bytes:
    head = (
        f"HTTP/1.1 {status} {reason}\r\n"
        f"Content-Type: text/html\r\n"
        f"Content-Length: {len(body)}\r\n"
        f"Connection: close\r\n\r\n"
    )
    return head.encode("ascii") + body


def response_body(payload: bytes) -> bytes:
    parts = payload.split(b"\r\n\r\n", 1)
    return parts[1] if len(parts) == 2 else b""
