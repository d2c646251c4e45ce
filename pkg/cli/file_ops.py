"""
Output files: JSON reports, input documents and the digest manifest.
Every command writes under output_dir; the manifest lists each file with its
SHA-256 so identical run configurations can be compared byte for byte.
"""

from __future__ import annotations

import hashlib
import json
import pathlib
from typing import Any, Iterable

from cli.constants import MANIFEST_NAME
from lib.errors import ConfigError
from lib.reports import jsonable
from lib.settings import load_json_document


def output_dir(settings: dict) -> pathlib.Path:
    p = pathlib.Path(settings.get("output_dir") or "runs")
    p.mkdir(parents=True, exist_ok=True)
    return p


def write_json(path: pathlib.Path, obj: Any) -> pathlib.Path:
    """Sorted keys, two-space indent, trailing newline."""
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(jsonable(obj), indent=2, sort_keys=True, allow_nan=False) + "\n", encoding="utf-8")
    return path


def sha256_file(path: pathlib.Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


def write_manifest(out_dir: pathlib.Path, names: Iterable[str]) -> pathlib.Path:
    """manifest.json: [{name, bytes, sha256}] sorted by name."""
    entries = []
    for name in sorted(set(names)):
        p = out_dir / name
        entries.append({"name": name, "bytes": p.stat().st_size, "sha256": sha256_file(p)})
    return write_json(out_dir / MANIFEST_NAME, {"files": entries})


def read_input_documents(settings: dict) -> list[tuple[str, dict]]:
    """(path, document) for every configured input; a missing or malformed file raises ConfigError."""
    return [(str(p), load_json_document(p)) for p in settings.get("inputs") or []]


def single_input(settings: dict, command: str) -> tuple[str, dict]:
    docs = read_input_documents(settings)
    if len(docs) != 1:
        raise ConfigError(f"{command} needs exactly one --input document (got {len(docs)})", field="inputs")
    return docs[0]
