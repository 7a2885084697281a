from .ingest import IngestResult, RejectedFile, ingest_folder
from .labelstore import Ack, LabelStore, LabelSubmission, VerificationStatus
from .manifest import load_dataset, save_dataset
from .palettes import ANCHORS, classify_rgb, jitter_color
from .splits import DatasetSplit, holdout_split, loso_splits
from .synth import (
    RenderInfo,
    SyntheticConfig,
    SyntheticDataset,
    generate_dataset,
    generate_school_registry,
)

__all__ = [
    "ANCHORS",
    "Ack",
    "DatasetSplit",
    "IngestResult",
    "LabelStore",
    "LabelSubmission",
    "RejectedFile",
    "RenderInfo",
    "SyntheticConfig",
    "SyntheticDataset",
    "VerificationStatus",
    "classify_rgb",
    "generate_dataset",
    "generate_school_registry",
    "holdout_split",
    "ingest_folder",
    "jitter_color",
    "load_dataset",
    "loso_splits",
    "save_dataset",
]
