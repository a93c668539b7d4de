"""Run manifests: every state-changing command records what it did.

A manifest carries the command, the config hash, the seed, digests of
every input file and of every produced artifact, so outputs chain back
to their inputs by digest.
"""

from __future__ import annotations

import hashlib
import json
import time
from pathlib import Path

from . import __version__


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fp:
        for block in iter(lambda: fp.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def digest_tree(path) -> str:
    """Digest of a file, or of a directory's files (sorted by name)."""
    p = Path(path)
    if p.is_file():
        return file_digest(p)
    h = hashlib.sha256()
    for f in sorted(q for q in p.rglob("*") if q.is_file() and q.name != "manifest.json"):
        h.update(f.name.encode())
        h.update(bytes.fromhex(file_digest(f)))
    return h.hexdigest()


def write_manifest(out_dir, command: str, inputs: dict, outputs: dict,
                   config_hash: str = "", seed: int | None = None,
                   extra: dict | None = None, name: str = "manifest.json") -> Path:
    record = {
        "command": command,
        "artifact_version": __version__,
        "config_hash": config_hash,
        "seed": seed,
        "inputs": {k: digest_tree(v) for k, v in inputs.items() if Path(v).exists()},
        "outputs": {k: digest_tree(v) for k, v in outputs.items() if Path(v).exists()},
        "finished": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
    }
    record.update(extra or {})
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / name
    with open(path, "w", encoding="utf-8") as fp:
        json.dump(record, fp, indent=2, sort_keys=True)
    return path


def read_manifest(path) -> dict:
    with open(path, encoding="utf-8") as fp:
        return json.load(fp)
