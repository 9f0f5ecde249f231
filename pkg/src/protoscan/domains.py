"""Test and control domain corpus.

Input files are newline-separated text: one domain per line, ``#``
comments and blank lines ignored. Entries may be bare hostnames or
URLs; published test-list CSVs reduce to this format by taking the
first comma-separated field and stripping scheme, path, and port.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .errors import DomainListError
from .netcodec import validate_hostname

BUNDLED_TEST_LIST = "global_test_list.txt"
BUNDLED_CONTROL_LIST = "control_domains.txt"


@dataclass(frozen=True, slots=True)
class DomainList:
    test_domains: tuple[str, ...]
    control_domains: tuple[str, ...]

    def __post_init__(self) -> None:
        overlap = set(self.test_domains) & set(self.control_domains)
        if overlap:
            raise DomainListError(f"domains in both test and control sets: {sorted(overlap)}")
        if not self.control_domains:
            raise DomainListError("control domain set is empty")

    def all_domains(self) -> tuple[str, ...]:
        return self.test_domains + self.control_domains

    def is_control(self, domain: str) -> bool:
        return domain in self._control_set

    @property
    def _control_set(self) -> frozenset[str]:
        return frozenset(self.control_domains)

    def dump(self, test_path: Path | str, control_path: Path | str) -> None:
        Path(test_path).write_text("".join(d + "\n" for d in self.test_domains))
        Path(control_path).write_text("".join(d + "\n" for d in self.control_domains))


def normalize_entry(line: str) -> str | None:
    """Reduce one input line to a bare lowercase hostname, or None to skip."""
    entry = line.strip()
    if not entry or entry.startswith("#"):
        return None
    entry = entry.split(",", 1)[0].strip()
    if "://" in entry:
        entry = entry.split("://", 1)[1]
    entry = entry.split("/", 1)[0]
    entry = entry.rsplit("@", 1)[-1]
    if entry.count(":") == 1:  # hostname:port (IPv6 literals are not hostnames)
        entry = entry.split(":", 1)[0]
    if not entry:
        return None
    return validate_hostname(entry)


def _read_domain_file(path: Path | str) -> list[str]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise DomainListError(f"cannot read domain list {path}: {exc}") from None
    seen: dict[str, None] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        try:
            domain = normalize_entry(line)
        except Exception as exc:
            raise DomainListError(f"{path}:{lineno}: {exc}") from None
        if domain is not None:
            seen.setdefault(domain, None)
    return list(seen)


def load_domain_list(test_path: Path | str, control_path: Path | str) -> DomainList:
    """Load, normalize, dedupe, and cross-check both corpora."""
    test = _read_domain_file(test_path)
    if not test:
        raise DomainListError(f"test list {test_path} contains no domains")
    control = _read_domain_file(control_path)
    if not control:
        raise DomainListError(f"control list {control_path} contains no domains")
    return DomainList(test_domains=tuple(test), control_domains=tuple(control))


def bundled_path(name: str) -> Path:
    """Filesystem path of a bundled data file."""
    return Path(resources.files("protoscan").joinpath("data", name))  # type: ignore[arg-type]


def load_bundled() -> DomainList:
    """The shipped global test list (1397 domains) and 10 control domains."""
    return load_domain_list(bundled_path(BUNDLED_TEST_LIST), bundled_path(BUNDLED_CONTROL_LIST))
