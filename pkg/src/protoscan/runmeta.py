"""Run directory layout and the manifest written before any probe is sent."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from . import __version__

MANIFEST_NAME = "manifest.json"
TAGMAP_NAME = "tagmap.csv"
TARGETS_NAME = "targets.csv"
OBSERVATIONS_NAME = "observations.jsonl"
CONTROLS_NAME = "controls.json"
CURSOR_NAME = "cursor.json"
REPORT_DIR = "report"


def sha256_file(path: Path | str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _utcnow() -> str:
    return datetime.now(timezone.utc).isoformat()


@dataclass
class RunManifest:
    command: str
    seeds: dict[str, int]
    input_digests: dict[str, str]
    protocols: list[str]
    parameters: dict = field(default_factory=dict)
    tool_version: str = __version__
    started_at: str = field(default_factory=_utcnow)
    finished_at: str | None = None

    def write(self, run_dir: Path | str) -> Path:
        path = Path(run_dir) / MANIFEST_NAME
        path.write_text(json.dumps(asdict(self), indent=2) + "\n")
        return path

    def finalize(self, run_dir: Path | str) -> None:
        self.finished_at = _utcnow()
        self.write(run_dir)

    @classmethod
    def load(cls, run_dir: Path | str) -> "RunManifest":
        raw = json.loads((Path(run_dir) / MANIFEST_NAME).read_text())
        return cls(**raw)


def digest_inputs(paths: dict[str, Path | str]) -> dict[str, str]:
    return {name: sha256_file(p) for name, p in paths.items() if p is not None}
