"""HTTP probe and TLS ClientHello builders, plus payload classification."""

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from protoscan.errors import InvalidHostname
from protoscan.netcodec import (
    ResponseClass,
    Transport,
    build_http_probe,
    build_http_response,
    build_tls_client_hello,
    classify_payload,
    extract_host,
    extract_sni,
)

from oracles import reference_dns_encode, walk_tls_lengths

_hostname = st.lists(
    st.text(alphabet="abcdefghijklmnopqrstuvwxyz0123456789", min_size=1, max_size=15),
    min_size=1,
    max_size=4,
).map(".".join)


def test_http_probe_carries_host_header():
    payload = build_http_probe("youtube.com")
    assert b"Host: youtube.com\r\n" in payload
    assert payload.startswith(b"GET / HTTP/1.1\r\n")
    assert payload.endswith(b"\r\n\r\n")
    assert payload.count(b"Host:") == 1


def test_http_probe_round_trip():
    assert extract_host(build_http_probe("blocked.example.org")) == "blocked.example.org"


def test_http_probe_rejects_empty_domain():
    with pytest.raises(InvalidHostname):
        build_http_probe("")


@settings(max_examples=100, deadline=None)
@given(domain=_hostname)
def test_host_extractor_inverts_builder(domain):
    assert extract_host(build_http_probe(domain)) == domain


def test_tls_hello_sni_round_trip():
    record = build_tls_client_hello("blocked.example", b"\x07" * 32)
    assert extract_sni(record) == "blocked.example"


def test_tls_hello_deterministic():
    rand = bytes(range(32))
    a = build_tls_client_hello("x.example", rand)
    b = build_tls_client_hello("x.example", rand)
    assert a == b


def test_tls_hello_passes_length_walker():
    record = build_tls_client_hello("some.domain.example", b"\xa1" * 32)
    parsed = walk_tls_lengths(record)
    assert parsed["sni"] == ["some.domain.example"]
    assert parsed["version"] == 0x0303


@settings(max_examples=100, deadline=None)
@given(domain=_hostname, rand=st.binary(min_size=32, max_size=32))
def test_tls_sni_extraction_random_domains(domain, rand):
    record = build_tls_client_hello(domain, rand)
    assert extract_sni(record) == domain
    walk_tls_lengths(record)  # raises on any inconsistent nested length


def test_tls_random_length_enforced():
    with pytest.raises(Exception):
        build_tls_client_hello("x.example", b"\x00" * 31)


# --- classify_payload ---------------------------------------------------


def test_classify_http_403_block_page():
    assert (
        classify_payload(b"HTTP/1.1 403 Forbidden\r\n\r\nblocked", Transport.TCP)
        == ResponseClass.HTTP_RESPONSE
    )


def test_classify_empty_is_empty():
    assert classify_payload(b"", Transport.TCP) == ResponseClass.EMPTY
    assert classify_payload(b"", Transport.UDP) == ResponseClass.EMPTY


def test_classify_reference_dns_answer():
    wire = reference_dns_encode(
        9, 0x8180, ("q.example", 1), [("q.example", 1, 30, bytes([8, 8, 8, 8]))]
    )
    assert classify_payload(wire, Transport.UDP) == ResponseClass.DNS_ANSWER


def test_classify_dns_query_is_not_answer():
    wire = reference_dns_encode(9, 0x0100, ("q.example", 1))
    assert classify_payload(wire, Transport.UDP) == ResponseClass.OTHER


def test_classify_tls_record():
    record = build_tls_client_hello("x.example", b"\x00" * 32)
    assert classify_payload(record, Transport.TCP) == ResponseClass.TLS_RECORD


def test_classify_http_response_builder_output():
    payload = build_http_response(200, "OK", b"<html>marker</html>")
    assert classify_payload(payload, Transport.TCP) == ResponseClass.HTTP_RESPONSE


@settings(max_examples=200, deadline=None)
@given(payload=st.binary(max_size=128), transport=st.sampled_from([Transport.TCP, Transport.UDP]))
def test_classify_total_and_deterministic(payload, transport):
    first = classify_payload(payload, transport)
    assert first == classify_payload(payload, transport)
    assert first in ResponseClass


def test_extractors_invert_builders_over_bundled_corpus():
    from protoscan.domains import load_bundled
    from protoscan.netcodec import RecordType, build_dns_query

    rand = b"\x3c" * 32
    for domain in load_bundled().all_domains():
        assert extract_host(build_http_probe(domain)) == domain
        assert extract_sni(build_tls_client_hello(domain, rand)) == domain
        assert build_dns_query(domain, RecordType.A, 1).question.qname == domain
