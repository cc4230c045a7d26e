"""Run-directory manifests.

A manifest pins everything needed to reproduce an artifact directory
bit-for-bit: the resolved config text, the seeds, and the SHA-256 of every
file written.
"""

from __future__ import annotations

import hashlib
import json
import os

MANIFEST_NAME = "manifest.json"


def _sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(out_dir, command: str, config_text: str, seeds) -> str:
    """Hash all files in ``out_dir`` and write the manifest beside them."""
    files = {}
    for root, _, names in os.walk(out_dir):
        for name in sorted(names):
            if name == MANIFEST_NAME:
                continue
            full = os.path.join(root, name)
            files[os.path.relpath(full, out_dir)] = _sha256_file(full)
    doc = {
        "command": command,
        "config_sha256": hashlib.sha256(config_text.encode()).hexdigest(),
        "config_text": config_text,
        "seeds": list(int(s) for s in seeds),
        "files": files,
    }
    path = os.path.join(out_dir, MANIFEST_NAME)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")
    return path


def read_manifest(out_dir) -> dict:
    with open(os.path.join(out_dir, MANIFEST_NAME)) as fh:
        return json.load(fh)


def verify_manifest(out_dir) -> list[str]:
    """Return the files whose current hash differs from the manifest."""
    doc = read_manifest(out_dir)
    bad = []
    for rel, digest in doc["files"].items():
        full = os.path.join(out_dir, rel)
        if not os.path.exists(full) or _sha256_file(full) != digest:
            bad.append(rel)
    return bad
