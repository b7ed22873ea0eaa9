"""Run provenance: resolved configuration, input digests, seed, version.

The manifest is the only output that contains a timestamp, so every other
artifact in a run directory stays byte-identical across reruns with the
same inputs and seed.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from datetime import datetime, timezone

from ._version import __version__
from .errors import ValidationError

MANIFEST_SCHEMA_VERSION = 1


def sha256_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass(frozen=True)
class RunManifest:
    """Everything needed to re-issue a run and check its inputs."""

    command: str
    config: dict
    inputs: dict                 # path -> sha256 hex digest
    master_seed: int
    version: str = __version__
    created_at: str = field(
        default_factory=lambda: datetime.now(timezone.utc).isoformat())

    def verify_inputs(self) -> list:
        """Paths whose current digest no longer matches the recorded one."""
        return [path for path, digest in self.inputs.items()
                if sha256_digest(path) != digest]


def create_manifest(command: str, config: dict, input_paths,
                    master_seed: int) -> RunManifest:
    inputs = {str(p): sha256_digest(p) for p in input_paths}
    return RunManifest(command, dict(config), inputs, master_seed)


def write_manifest(manifest: RunManifest, path) -> None:
    doc = {
        "schema_version": MANIFEST_SCHEMA_VERSION,
        "command": manifest.command,
        "config": manifest.config,
        "inputs": manifest.inputs,
        "master_seed": manifest.master_seed,
        "version": manifest.version,
        "created_at": manifest.created_at,
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_manifest(path) -> RunManifest:
    with open(path) as fh:
        doc = json.load(fh)
    version = doc.get("schema_version")
    if version != MANIFEST_SCHEMA_VERSION:
        raise ValidationError(f"unsupported manifest schema version {version}")
    return RunManifest(doc["command"], doc["config"], doc["inputs"],
                       doc["master_seed"], doc["version"], doc["created_at"])
