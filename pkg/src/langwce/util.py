"""Shared plumbing: error types, seed derivation, file digests."""

from __future__ import annotations

import hashlib
from pathlib import Path


class UsageError(Exception):
    """Bad command-line usage or invalid flag combination (exit code 1)."""


class DataFormatError(Exception):
    """Malformed input data: WAV format, manifest, checkpoint, CSV (exit code 2)."""


class DivergenceError(Exception):
    """Training produced a non-finite loss (exit code 3)."""


def derive_seed(base: int, *tokens) -> int:
    """Stable 63-bit seed derived from a base seed and string/int tokens.

    Hash-based so per-item seeds are independent of processing order.
    """
    h = hashlib.sha256()
    h.update(str(int(base)).encode())
    for tok in tokens:
        h.update(b"\x1f")
        h.update(str(tok).encode())
    return int.from_bytes(h.digest()[:8], "little") >> 1


def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()
