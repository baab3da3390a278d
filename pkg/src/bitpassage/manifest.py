"""Run manifests: one JSON record per command, written alongside its outputs,
carrying everything needed to reproduce the run."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict

from .errors import DataError


@dataclass
class RunManifest:
    command: str
    config: Dict[str, object]
    seed: int
    inputs: Dict[str, str]
    outputs: Dict[str, str]
    version: str
    duration_s: float
    stats: Dict[str, object] = field(default_factory=dict)


def manifest_path_for(output_path) -> Path:
    """Manifest sits next to its primary output as <name>.manifest.json."""
    p = Path(output_path)
    if p.suffix == ".json" and p.name.endswith(".manifest.json"):
        return p
    return p.parent / (p.name + ".manifest.json")


def write_manifest(manifest: RunManifest, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(asdict(manifest), indent=2, sort_keys=True) + "\n")
    return path


def load_manifest(path) -> RunManifest:
    try:
        obj = json.loads(Path(path).read_text())
        return RunManifest(**obj)
    except (OSError, json.JSONDecodeError, TypeError) as exc:
        raise DataError(f"{path}: cannot load manifest: {exc}") from exc
