"""Run manifests: everything needed to reproduce an artifact, plus its hash.

Every CSV/JSON artifact embeds the hash of the manifest that produced it, so
evaluation can refuse to mix files from different runs.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field


class ManifestError(ValueError):
    """Manifest mismatch or malformed manifest file."""


@dataclass(frozen=True)
class RunManifest:
    kind: str  # "simulate", "train" or "run"
    seed: int
    scanner: dict = field(default_factory=dict)
    campaign: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)  # content hashes of configs used
    threshold: float | None = None
    parent_hash: str | None = None  # hash of the upstream manifest, if any

    def to_dict(self) -> dict:
        return asdict(self)

    def hash(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode()).hexdigest()[:16]


def save_manifest(manifest: RunManifest, path) -> None:
    data = manifest.to_dict()
    data["manifest_hash"] = manifest.hash()
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_manifest(path) -> tuple[RunManifest, str]:
    with open(path) as fh:
        data = json.load(fh)
    stored = data.pop("manifest_hash", None)
    try:
        manifest = RunManifest(**data)
    except TypeError as e:
        raise ManifestError(f"{path}: malformed manifest ({e})")
    if stored is not None and stored != manifest.hash():
        raise ManifestError(f"{path}: stored hash {stored} does not match contents")
    return manifest, manifest.hash()


def content_hash(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def require_same_lineage(label_hash: str | None, diagnosis_parent: str | None,
                         context: str) -> None:
    """Labels come from a simulate run; run products record it as parent."""
    if label_hash is None or diagnosis_parent is None:
        return  # unhashed inputs are allowed, nothing to compare
    if label_hash != diagnosis_parent:
        raise ManifestError(
            f"{context}: inputs come from different runs "
            f"(labels manifest {label_hash}, diagnosis parent {diagnosis_parent})")
