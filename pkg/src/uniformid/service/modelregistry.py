"""Versioned model registry: artifact files plus an append-only index.

Every entry records the artifact file digest; loads and ``verify``
recompute it, so a tampered or bit-rotted artifact is refused rather
than silently served.  "Newest" means latest registered (journal order)
unless a version is pinned by the caller.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .. import textio
from ..artifacts import ModelArtifact, file_digest
from ..clock import now_iso
from ..errors import ConfigError, IntegrityError

_KIND = "model_registry"
MODEL_KINDS = ("uniform", "attribute", "single_label", "backbone")


@dataclass(frozen=True)
class ModelRegistryEntry:
    kind: str
    version: str
    filename: str
    artifact_sha256: str
    train_digest: str
    metrics: str
    created: str


class ModelRegistry:
    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._index = self.root / "registry.tsv"

    def entries(self) -> list[ModelRegistryEntry]:
        if not self._index.exists():
            return []
        body = textio.split_document(self._index.read_text(), _KIND)
        out = []
        for ln in body:
            kind, version, filename, sha, train_digest, metrics, created = ln.split("\t")
            out.append(
                ModelRegistryEntry(
                    kind=kind,
                    version=version,
                    filename=filename,
                    artifact_sha256=sha,
                    train_digest=train_digest,
                    metrics=metrics,
                    created=created,
                )
            )
        return out

    def register(self, kind: str, version: str, artifact: ModelArtifact) -> ModelRegistryEntry:
        if kind not in MODEL_KINDS:
            raise ConfigError(f"unknown model kind {kind!r}")
        if any(e.kind == kind and e.version == version for e in self.entries()):
            raise ConfigError(f"({kind}, {version}) already registered")
        filename = f"{kind}-{version}.uidm"
        path = self.root / filename
        artifact.save(path)
        entry = ModelRegistryEntry(
            kind=kind,
            version=version,
            filename=filename,
            artifact_sha256=file_digest(path),
            train_digest=artifact.fields.get("train_digest", "-"),
            metrics=artifact.fields.get("metrics", "-"),
            created=now_iso(),
        )
        new = not self._index.exists()
        with self._index.open("a") as fh:
            if new:
                fh.write(textio.header(_KIND) + "\n")
            fh.write(
                "\t".join(
                    [
                        entry.kind,
                        entry.version,
                        entry.filename,
                        entry.artifact_sha256,
                        entry.train_digest,
                        entry.metrics,
                        entry.created,
                    ]
                )
                + "\n"
            )
        return entry

    def latest(self, kind: str, pin_version: Optional[str] = None) -> ModelRegistryEntry:
        matches = [e for e in self.entries() if e.kind == kind]
        if pin_version is not None:
            matches = [e for e in matches if e.version == pin_version]
        if not matches:
            pin = f" (pinned {pin_version})" if pin_version else ""
            raise ConfigError(f"no {kind!r} model registered{pin}")
        return matches[-1]

    def load_artifact(self, entry: ModelRegistryEntry) -> ModelArtifact:
        path = self.root / entry.filename
        if not path.exists():
            raise IntegrityError(f"registered artifact missing: {path}")
        if file_digest(path) != entry.artifact_sha256:
            raise IntegrityError(
                f"artifact {entry.filename} digest mismatch; refusing to load"
            )
        return ModelArtifact.load(path)

    def verify(self) -> list[str]:
        """Recompute every artifact digest; returns problem strings."""
        problems = []
        seen: set[tuple[str, str]] = set()
        for entry in self.entries():
            key = (entry.kind, entry.version)
            if key in seen:
                problems.append(f"duplicate entry {key}")
            seen.add(key)
            path = self.root / entry.filename
            if not path.exists():
                problems.append(f"missing artifact file {entry.filename}")
            elif file_digest(path) != entry.artifact_sha256:
                problems.append(f"digest mismatch for {entry.filename}")
        return problems
