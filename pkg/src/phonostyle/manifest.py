"""Run manifests: provenance for every output directory.

One manifest per run directory, naming the tool version, the effective
configuration hash, the seed, and sha256 digests of every input and
output file. Digests are recomputable; two runs of the same invocation
on the same inputs produce identical output digests.
"""

from __future__ import annotations

import hashlib
import json
from datetime import datetime, timezone
from pathlib import Path

from . import __version__

MANIFEST_NAME = "manifest.json"


def file_digest(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return f"sha256:{h.hexdigest()}"


def config_hash(effective: dict) -> str:
    blob = json.dumps(effective, sort_keys=True, ensure_ascii=False, default=str)
    return f"sha256:{hashlib.sha256(blob.encode('utf-8')).hexdigest()}"


class ManifestWriter:
    def __init__(self, subcommand: str, effective_config: dict, seed: int | None):
        self.subcommand = subcommand
        self.config_hash = config_hash(effective_config)
        self.seed = seed
        self.started = datetime.now(timezone.utc).isoformat()
        self.inputs: dict[str, str] = {}
        self.outputs: dict[str, str] = {}

    def add_input(self, path: str | Path) -> None:
        self.inputs[str(path)] = file_digest(path)

    def add_output(self, path: str | Path) -> None:
        self.outputs[str(path)] = file_digest(path)

    def write(self, out_dir: str | Path) -> Path:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        payload = {
            "tool": "phonostyle",
            "version": __version__,
            "subcommand": self.subcommand,
            "config_hash": self.config_hash,
            "seed": self.seed,
            "started": self.started,
            "finished": datetime.now(timezone.utc).isoformat(),
            "inputs": dict(sorted(self.inputs.items())),
            "outputs": dict(sorted(self.outputs.items())),
        }
        path = out_dir / MANIFEST_NAME
        path.write_text(json.dumps(payload, indent=2, sort_keys=True, ensure_ascii=False) + "\n", encoding="utf-8")
        return path
