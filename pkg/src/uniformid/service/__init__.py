from .config import PipelineConfig
from .modelregistry import ModelRegistry, ModelRegistryEntry
from .pipeline import CaseStore, PipelineRuntime, batch, run_pipeline

__all__ = [
    "CaseStore",
    "ModelRegistry",
    "ModelRegistryEntry",
    "PipelineConfig",
    "PipelineRuntime",
    "batch",
    "run_pipeline",
]
