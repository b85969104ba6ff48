"""JSONL corpus manifests.

One record per line: {"id", "lang", "text", "wav", "split", "augmented"}.
WAV paths are stored relative to the manifest file's directory.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

from .util import DataFormatError

FIELDS = ("id", "lang", "text", "wav", "split", "augmented")


@dataclass(frozen=True)
class ManifestEntry:
    id: str
    lang: str
    text: str
    wav: str
    split: str
    augmented: bool = False


def read_manifest(path: str | Path) -> list[ManifestEntry]:
    path = Path(path)
    entries = []
    with open(path) as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as e:
                raise DataFormatError(f"{path}:{lineno}: invalid JSON: {e}") from e
            missing = [k for k in FIELDS if k not in rec]
            if missing:
                raise DataFormatError(f"{path}:{lineno}: missing fields {missing}")
            entries.append(ManifestEntry(**{k: rec[k] for k in FIELDS}))
    if not entries:
        raise DataFormatError(f"{path}: empty manifest")
    return entries


def write_manifest(path: str | Path, entries: list[ManifestEntry]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        for e in entries:
            f.write(json.dumps(asdict(e), sort_keys=True) + "\n")
    return path


def resolve_wav(manifest_path: str | Path, entry: ManifestEntry) -> Path:
    return (Path(manifest_path).parent / entry.wav).resolve()
