"""Canonical JSON serialization, atomic writes, and content addressing.

Every artifact the engine persists goes through ``dump_json`` so that byte
layout is stable (UTF-8, sorted keys, fixed indentation) and replays of the
same state produce identical files. Content addresses are sha256 over the
canonical bytes.
"""

from __future__ import annotations

import hashlib
import json
import os
from pathlib import Path
from typing import Any


def canonical_bytes(obj: Any) -> bytes:
    """Serialize ``obj`` to the engine's canonical JSON byte form."""
    return (json.dumps(obj, sort_keys=True, ensure_ascii=False, indent=2) + "\n").encode("utf-8")


def content_address(obj: Any) -> str:
    """sha256 hex digest of the canonical serialization."""
    return hashlib.sha256(canonical_bytes(obj)).hexdigest()


def dump_json(path: Path | str, obj: Any) -> str:
    """Atomically write canonical JSON to ``path``; returns the content address."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = canonical_bytes(obj)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(data)
        fh.flush()
        os.fsync(fh.fileno())
    tmp.rename(path)
    return hashlib.sha256(data).hexdigest()


def load_json(path: Path | str) -> Any:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def dump_text(path: Path | str, text: str) -> str:
    """Atomically write UTF-8 text; returns its sha256 content address."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = text.encode("utf-8")
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(data)
        fh.flush()
        os.fsync(fh.fileno())
    tmp.rename(path)
    return hashlib.sha256(data).hexdigest()


def file_address(path: Path | str) -> str:
    """sha256 of a file's current bytes."""
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(65536), b""):
            h.update(block)
    return h.hexdigest()
