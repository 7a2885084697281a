"""Batch and single-image pipeline execution plus the case store.

A CaseRecord is the unit of analyst work: the uniform verdict, the
model's attribute distribution, any analyst-edited distribution, the
latest school ranking, and an append-only audit trail.  Cases persist to
a JSON-lines journal (one event per line) that replays into identical
state on load — no database, matching the single-container offline
deployment shape.
"""

from __future__ import annotations

import hashlib
import io
import json
from dataclasses import dataclass, field
from pathlib import Path
from threading import Lock
from typing import Any, Optional

import numpy as np
from PIL import Image, UnidentifiedImageError

from ..attributes import AttributeNet, predict_attributes
from ..backbones import EmbeddingCache, backbone_by_name
from ..clock import now_iso
from ..errors import ConfigError, DataError, DetectorError
from ..preprocessing import (
    WholeImageDetector,
    extract_persons,
    filter_low_resolution,
    resize_normalize,
)
from ..schema import AttributeDistribution, ImageRecord, ImageSource, SchoolRegistry
from ..search import SearchQuery, SearchResult, search
from ..uniform import UniformModel
from .. import textio
from .config import PipelineConfig
from .jsonio import dist_from_json, dist_to_json, search_result_from_json, search_result_to_json
from .modelregistry import ModelRegistry


@dataclass
class CaseRecord:
    case_id: str
    image_ref: str
    uniform_probability: float
    verdict: bool
    distribution: Optional[AttributeDistribution] = None
    edited_distribution: Optional[AttributeDistribution] = None
    search_result: Optional[SearchResult] = None
    warnings: tuple[str, ...] = ()
    crop_box: Optional[tuple[int, int, int, int]] = None
    audit: list[dict[str, Any]] = field(default_factory=list)

    @property
    def active_distribution(self) -> Optional[AttributeDistribution]:
        return self.edited_distribution or self.distribution

    def to_json(self) -> dict[str, Any]:
        return {
            "case_id": self.case_id,
            "image_ref": self.image_ref,
            "uniform_probability": self.uniform_probability,
            "verdict": self.verdict,
            "distribution": dist_to_json(self.distribution) if self.distribution else None,
            "edited_distribution": dist_to_json(self.edited_distribution)
            if self.edited_distribution
            else None,
            "search_result": search_result_to_json(self.search_result)
            if self.search_result
            else None,
            "warnings": list(self.warnings),
            "crop_box": list(self.crop_box) if self.crop_box else None,
            "audit": self.audit,
        }

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> "CaseRecord":
        return cls(
            case_id=obj["case_id"],
            image_ref=obj["image_ref"],
            uniform_probability=obj["uniform_probability"],
            verdict=obj["verdict"],
            distribution=dist_from_json(obj["distribution"]) if obj.get("distribution") else None,
            edited_distribution=dist_from_json(obj["edited_distribution"])
            if obj.get("edited_distribution")
            else None,
            search_result=search_result_from_json(obj["search_result"])
            if obj.get("search_result")
            else None,
            warnings=tuple(obj.get("warnings", ())),
            crop_box=tuple(obj["crop_box"]) if obj.get("crop_box") else None,
            audit=list(obj.get("audit", [])),
        )


class CaseStore:
    """Single-writer JSON-lines journal of case events."""

    def __init__(self, path: Optional[str | Path] = None):
        self._path = Path(path) if path else None
        self._cases: dict[str, CaseRecord] = {}
        self._lock = Lock()
        if self._path and self._path.exists():
            for line in self._path.read_text().splitlines():
                if not line.strip():
                    continue
                event = json.loads(line)
                self._replay(event)

    def _replay(self, event: dict[str, Any]) -> None:
        if event["event"] == "case_created":
            record = CaseRecord.from_json(event["case"])
            self._cases[record.case_id] = record
        elif event["event"] == "attributes_edited":
            record = self._cases[event["case_id"]]
            record.edited_distribution = dist_from_json(event["distribution"])
            record.search_result = search_result_from_json(event["search_result"])
            record.audit.append(event["audit_entry"])
        else:
            raise DataError(f"unknown case event {event['event']!r}")

    def _append(self, event: dict[str, Any]) -> None:
        if self._path:
            with self._path.open("a") as fh:
                fh.write(json.dumps(event, sort_keys=True) + "\n")

    def put_new(self, record: CaseRecord) -> None:
        with self._lock:
            self._cases[record.case_id] = record
            self._append({"event": "case_created", "case": record.to_json()})

    def record_edit(
        self, case_id: str, distribution: AttributeDistribution, result: SearchResult
    ) -> CaseRecord:
        with self._lock:
            record = self._cases[case_id]
            prior = record.active_distribution
            audit_entry = {
                "at": now_iso(),
                "action": "attributes_edited",
                "prior_distribution": dist_to_json(prior) if prior else None,
            }
            record.edited_distribution = distribution
            record.search_result = result
            record.audit.append(audit_entry)
            self._append(
                {
                    "event": "attributes_edited",
                    "case_id": case_id,
                    "distribution": dist_to_json(distribution),
                    "search_result": search_result_to_json(result),
                    "audit_entry": audit_entry,
                }
            )
            return record

    def get(self, case_id: str) -> CaseRecord:
        try:
            return self._cases[case_id]
        except KeyError:
            raise DataError(f"no such case {case_id!r}") from None

    def all_cases(self) -> list[CaseRecord]:
        return list(self._cases.values())

    def snapshot(self) -> int:
        """Compact the journal: rewrite one creation event per case with
        its current state (audit trails included). Returns event count."""
        with self._lock:
            if not self._path:
                return len(self._cases)
            tmp = self._path.with_suffix(self._path.suffix + ".snapshot")
            with tmp.open("w") as fh:
                for case_id in sorted(self._cases):
                    event = {"event": "case_created", "case": self._cases[case_id].to_json()}
                    fh.write(json.dumps(event, sort_keys=True) + "\n")
            tmp.replace(self._path)
            return len(self._cases)


class PipelineRuntime:
    """Everything a request needs, loaded once: models, registry, cache."""

    def __init__(
        self,
        config: PipelineConfig,
        uniform_model: UniformModel,
        attribute_net: AttributeNet,
        school_registry: SchoolRegistry,
        detector,
        case_store: CaseStore,
        versions: dict[str, str],
    ):
        self.config = config
        self.uniform_model = uniform_model
        self.attribute_net = attribute_net
        self.school_registry = school_registry
        self.detector = detector
        self.case_store = case_store
        self.versions = versions
        self.cache = EmbeddingCache()

    @classmethod
    def from_config(cls, config: PipelineConfig) -> "PipelineRuntime":
        registry = ModelRegistry(config.model_root)
        backbone = backbone_by_name(config.backbone, config.backbone_weights)

        uni_entry = registry.latest("uniform", config.pin_uniform_version)
        uniform_model = UniformModel.from_artifact(registry.load_artifact(uni_entry))
        uniform_model.bind_backbone(backbone)

        attr_entry = registry.latest("attribute", config.pin_attribute_version)
        attr_path = registry.root / attr_entry.filename
        registry.load_artifact(attr_entry)  # digest check
        attribute_net = AttributeNet.load(attr_path)

        school_registry = textio.decode_registry(Path(config.school_registry).read_text())
        if config.detector == "whole-image":
            detector = WholeImageDetector()
        else:
            raise ConfigError(
                f"detector {config.detector!r} is not available in service mode"
            )
        store = CaseStore(config.case_store)
        return cls(
            config=config,
            uniform_model=uniform_model,
            attribute_net=attribute_net,
            school_registry=school_registry,
            detector=detector,
            case_store=store,
            versions={"uniform": uni_entry.version, "attribute": attr_entry.version},
        )

    def search(self, query: SearchQuery) -> SearchResult:
        return search(self.school_registry, query)


def decode_image_bytes(raw: bytes, ref: str = "upload") -> ImageRecord:
    try:
        with Image.open(io.BytesIO(raw)) as im:
            pixels = np.asarray(im.convert("RGB"), dtype=np.uint8)
    except (UnidentifiedImageError, OSError, ValueError) as exc:
        raise DataError(f"cannot decode image {ref!r}: {exc}") from exc
    image_id = "img-" + hashlib.sha256(raw).hexdigest()[:16]
    return ImageRecord(
        image_id=image_id, pixels=pixels, byte_size=len(raw), source=ImageSource.INGESTED
    )


def run_pipeline(
    raw: bytes, runtime: PipelineRuntime, image_ref: str = "upload"
) -> CaseRecord:
    """Full chain: detect person -> resize -> uniform verdict -> (if
    positive) attributes -> school search.  Persists and returns the case.
    """
    config = runtime.config
    record = decode_image_bytes(raw, image_ref)

    warnings: list[str] = []
    if record.byte_size > config.max_image_bytes or max(record.width, record.height) > config.max_image_dim:
        warnings.append(
            "oversized input: predictions may be unreliable for large images"
        )

    try:
        crops = extract_persons(record, runtime.detector, min_confidence=0.5)
    except DetectorError:
        if not config.fallback_whole_image:
            raise
        crops = []
    if crops:
        kept, _discarded = filter_low_resolution(
            [record], config.min_width, config.min_height, config.min_bytes
        )
        if not kept:
            warnings.append("below minimum resolution thresholds")
        source = crops[0]
        crop_box = source.bounding_box
    else:
        source = record
        crop_box = (0, 0, record.width, record.height)

    block = resize_normalize(source)
    probability = runtime.uniform_model.predict_proba(block)
    verdict = probability >= config.uniform_threshold

    case_id = "case-" + hashlib.sha256(raw).hexdigest()[:16]
    record_out = CaseRecord(
        case_id=case_id,
        image_ref=image_ref,
        uniform_probability=probability,
        verdict=verdict,
        warnings=tuple(warnings),
        crop_box=crop_box,
        audit=[{"at": now_iso(), "action": "case_created", "verdict": verdict}],
    )
    if verdict:
        dist = predict_attributes(runtime.attribute_net, block)
        record_out.distribution = dist
        query = SearchQuery(
            distribution=dist, top_n=config.search_top_n, epsilon=config.search_epsilon
        )
        record_out.search_result = runtime.search(query)
    runtime.case_store.put_new(record_out)
    return record_out


@dataclass
class BatchSummary:
    total_files: int
    processed: int
    uniform_positive: int
    uniform_negative: int
    failures: list[tuple[str, str]]


def batch(folder: str | Path, runtime: PipelineRuntime) -> tuple[BatchSummary, list[CaseRecord]]:
    """Process every file in a folder, isolating per-image failures."""
    root = Path(folder)
    if not root.is_dir():
        raise DataError(f"not a readable directory: {root}")
    cases: list[CaseRecord] = []
    failures: list[tuple[str, str]] = []
    files = [p for p in sorted(root.iterdir()) if p.is_file()]
    for path in files:
        try:
            case = run_pipeline(path.read_bytes(), runtime, image_ref=path.name)
            cases.append(case)
        except DataError as exc:
            failures.append((path.name, str(exc)))
    summary = BatchSummary(
        total_files=len(files),
        processed=len(cases),
        uniform_positive=sum(1 for c in cases if c.verdict),
        uniform_negative=sum(1 for c in cases if not c.verdict),
        failures=failures,
    )
    return summary, cases
