"""Domain-list loading, normalization, and the bundled fixtures."""

import pytest

from protoscan.domains import (
    DomainList,
    load_bundled,
    load_domain_list,
    normalize_entry,
)
from protoscan.errors import DomainListError


@pytest.fixture
def write_lists(tmp_path):
    def _write(test_lines, control_lines=("control-00.ctl.example",)):
        test = tmp_path / "test.txt"
        control = tmp_path / "control.txt"
        test.write_text("".join(line + "\n" for line in test_lines))
        control.write_text("".join(line + "\n" for line in control_lines))
        return test, control

    return _write


def test_dedupe_and_normalize(write_lists):
    test, control = write_lists(["Example.COM", "example.com", "#c", ""])
    dl = load_domain_list(test, control)
    assert dl.test_domains == ("example.com",)


def test_url_stripping():
    assert normalize_entry("https://youtube.com/watch") == "youtube.com"
    assert normalize_entry("http://News.Example.org:8080/path?q=1") == "news.example.org"
    assert normalize_entry("site.example,category,notes") == "site.example"
    assert normalize_entry("user@host.example") == "host.example"
    assert normalize_entry("   ") is None
    assert normalize_entry("# comment") is None


def test_bundled_fixture_has_1397_unique_domains():
    dl = load_bundled()
    assert len(dl.test_domains) == 1397
    assert len(set(dl.test_domains)) == 1397
    assert len(dl.control_domains) == 10


def test_bundled_count_matches_naive_recount():
    from protoscan.domains import BUNDLED_TEST_LIST, bundled_path

    # naive oracle: count distinct non-comment, non-blank lines
    lines = bundled_path(BUNDLED_TEST_LIST).read_text().splitlines()
    distinct = {l.strip().lower() for l in lines if l.strip() and not l.startswith("#")}
    assert len(load_bundled().test_domains) == len(distinct)


def test_first_seen_order_preserved(write_lists):
    test, control = write_lists(["b.example", "a.example", "b.example"])
    dl = load_domain_list(test, control)
    assert dl.test_domains == ("b.example", "a.example")


def test_load_is_idempotent(tmp_path, write_lists):
    test, control = write_lists(
        ["https://One.example/x", "two.example", "one.example"],
        ["ctl-a.example", "ctl-b.example"],
    )
    dl = load_domain_list(test, control)
    out_t, out_c = tmp_path / "out_t.txt", tmp_path / "out_c.txt"
    dl.dump(out_t, out_c)
    assert load_domain_list(out_t, out_c) == dl


def test_missing_file_errors(tmp_path):
    with pytest.raises(DomainListError):
        load_domain_list(tmp_path / "nope.txt", tmp_path / "nope2.txt")


def test_empty_test_list_errors(write_lists):
    test, control = write_lists(["# only a comment"])
    with pytest.raises(DomainListError):
        load_domain_list(test, control)


def test_overlap_errors(write_lists):
    test, control = write_lists(["shared.example"], ["shared.example"])
    with pytest.raises(DomainListError):
        load_domain_list(test, control)


def test_invalid_entry_reports_line(write_lists):
    test, control = write_lists(["ok.example", "bad..name"])
    with pytest.raises(DomainListError, match="2"):
        load_domain_list(test, control)


def test_is_control():
    dl = DomainList(("t.example",), ("c.example",))
    assert dl.is_control("c.example") and not dl.is_control("t.example")
    assert dl.all_domains() == ("t.example", "c.example")
