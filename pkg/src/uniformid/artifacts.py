"""Versioned model artifact files: text header + raw parameter blob.

Layout (binary file)::

    #uniformid.v1 kind=model_artifact\n
    model_kind: <uniform|attribute|single_label|backbone>\n
    <key>: <value>\n                (fixed, documented order per kind)
    params_sha256: <hex>\n
    blob_bytes: <N>\n
    ---\n
    <N raw bytes>

The parameter blob is the deterministic packer from nn.net (no zip, no
pickle, no timestamps), so identical models produce identical files and
the blob digest is verifiable on load.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path

from .errors import IntegrityError, SchemaViolation
from .schema import SCHEMA_VERSION

_HEADER = f"#{SCHEMA_VERSION} kind=model_artifact"


@dataclass
class ModelArtifact:
    model_kind: str
    fields: dict[str, str] = field(default_factory=dict)
    blob: bytes = b""

    @property
    def params_sha256(self) -> str:
        return hashlib.sha256(self.blob).hexdigest()

    def to_bytes(self) -> bytes:
        lines = [_HEADER, f"model_kind: {self.model_kind}"]
        for key, value in self.fields.items():
            if "\n" in key or "\n" in str(value):
                raise SchemaViolation(f"artifact field {key!r} contains a newline")
            lines.append(f"{key}: {value}")
        lines.append(f"params_sha256: {self.params_sha256}")
        lines.append(f"blob_bytes: {len(self.blob)}")
        lines.append("---")
        return ("\n".join(lines) + "\n").encode() + self.blob

    @classmethod
    def from_bytes(cls, raw: bytes) -> "ModelArtifact":
        marker = b"\n---\n"
        split_at = raw.find(marker)
        if split_at < 0:
            raise IntegrityError("artifact missing header/blob separator")
        header_text = raw[:split_at].decode()
        blob = raw[split_at + len(marker) :]
        lines = header_text.split("\n")
        if lines[0] != _HEADER:
            raise IntegrityError(f"bad artifact header {lines[0]!r}")
        fields: dict[str, str] = {}
        model_kind = ""
        declared_sha = ""
        declared_len = -1
        for ln in lines[1:]:
            key, sep, value = ln.partition(": ")
            if not sep:
                raise IntegrityError(f"bad artifact header line {ln!r}")
            if key == "model_kind":
                model_kind = value
            elif key == "params_sha256":
                declared_sha = value
            elif key == "blob_bytes":
                declared_len = int(value)
            else:
                fields[key] = value
        if len(blob) != declared_len:
            raise IntegrityError(
                f"artifact blob is {len(blob)} bytes, header declares {declared_len}"
            )
        actual = hashlib.sha256(blob).hexdigest()
        if actual != declared_sha:
            raise IntegrityError("artifact parameter digest mismatch (tampered file?)")
        return cls(model_kind=model_kind, fields=fields, blob=blob)

    def save(self, path: str | Path) -> None:
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def load(cls, path: str | Path) -> "ModelArtifact":
        return cls.from_bytes(Path(path).read_bytes())


def file_digest(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def save_probe_batch(path: str | Path, batch) -> None:
    """Persist a fixed probe batch for save/load round-trip checks."""
    from .nn.net import Param, params_to_bytes

    art = ModelArtifact(
        model_kind="probe_batch",
        fields={"payload": "probe_batch"},
        blob=params_to_bytes([Param("probe", batch)]),
    )
    art.save(path)


def load_probe_batch(path: str | Path):
    from .nn.net import params_from_bytes

    art = ModelArtifact.load(path)
    if art.fields.get("payload") != "probe_batch":
        raise IntegrityError(f"{path}: not a probe batch file")
    return params_from_bytes(art.blob)[0].value


def ids_digest(image_ids) -> str:
    """Order-independent digest of an image-id set (leakage checks)."""
    h = hashlib.sha256()
    for i in sorted(image_ids):
        h.update(i.encode())
        h.update(b"\x00")
    return h.hexdigest()
