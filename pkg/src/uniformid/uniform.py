"""Binary uniform-presence model: frozen backbone + trainable FC head.

The backbone never trains; its embeddings are cached, so training is a
head-only optimization and the 10-fold robustness study stays cheap.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .artifacts import ModelArtifact, ids_digest
from .backbones import EmbeddingBackbone, EmbeddingCache
from .clock import now_iso
from .errors import ConfigError, IntegrityError, TrainingError
from .nn import Adam, Dense, ReLU, Sequential, derive_rng, sigmoid, sigmoid_bce
from .nn.net import params_digest, params_from_bytes, params_to_bytes
from .preprocessing import INPUT_SIZE
from .schema import SCHEMA_VERSION, ImageRecord


@dataclass(frozen=True)
class TrainConfig:
    hidden: tuple[int, ...] = (256, 64)
    learning_rate: float = 1e-3
    batch_size: int = 32
    epochs: int = 12
    seed: int = 0
    patience: int = 4

    def __post_init__(self):
        if any(h < 1 for h in self.hidden):
            raise ConfigError("hidden sizes must be positive")
        if self.learning_rate <= 0 or self.batch_size < 1 or self.epochs < 0:
            raise ConfigError("learning_rate/batch_size/epochs out of range")
        if self.patience < 1:
            raise ConfigError("patience must be >= 1")

    @property
    def digest(self) -> str:
        canon = (
            f"hidden={','.join(map(str, self.hidden))};lr={self.learning_rate!r};"
            f"batch={self.batch_size};epochs={self.epochs};seed={self.seed};"
            f"patience={self.patience}"
        )
        return hashlib.sha256(canon.encode()).hexdigest()


def _build_head(input_dim: int, hidden: tuple[int, ...], rng) -> Sequential:
    layers: list = []
    d = input_dim
    for i, h in enumerate(hidden):
        layers.append(Dense(d, h, rng=rng, name=f"head{i}"))
        layers.append(ReLU())
        d = h
    layers.append(Dense(d, 1, rng=rng, name="out", init_std=0.01))
    return Sequential(layers)


@dataclass
class UniformModel:
    backbone_name: str
    backbone_digest: str
    head: Sequential
    config_digest: str
    train_digest: str
    metrics: dict[str, str] = field(default_factory=dict)
    schema_version: str = SCHEMA_VERSION
    _backbone: Optional[EmbeddingBackbone] = None

    def bind_backbone(self, backbone: EmbeddingBackbone) -> "UniformModel":
        if backbone.digest != self.backbone_digest:
            raise IntegrityError(
                f"backbone digest mismatch: model was trained with "
                f"{self.backbone_name}/{self.backbone_digest[:12]}"
            )
        self._backbone = backbone
        return self

    @property
    def backbone(self) -> EmbeddingBackbone:
        if self._backbone is None:
            raise ConfigError("model has no backbone bound; call bind_backbone()")
        return self._backbone

    @property
    def head_digest(self) -> str:
        return params_digest(self.head.params())

    def predict_from_embeddings(self, embeddings: np.ndarray) -> np.ndarray:
        logits = self.head.forward(embeddings.astype(np.float32))
        return sigmoid(logits).ravel()

    def predict_proba(self, block: np.ndarray) -> float:
        if block.shape != (INPUT_SIZE, INPUT_SIZE, 3):
            raise ConfigError(f"input block must be {INPUT_SIZE}x{INPUT_SIZE}x3")
        emb = self.backbone.embed(block[None].astype(np.float32))
        return float(self.predict_from_embeddings(emb)[0])

    def to_artifact(self) -> ModelArtifact:
        fields = {
            "schema": self.schema_version,
            "backbone": self.backbone_name,
            "backbone_digest": self.backbone_digest,
            "config_digest": self.config_digest,
            "train_digest": self.train_digest,
            "created": now_iso(),
            "metrics": ";".join(f"{k}={v}" for k, v in sorted(self.metrics.items())) or "-",
        }
        return ModelArtifact(
            model_kind="uniform", fields=fields, blob=params_to_bytes(self.head.params())
        )

    def save(self, path: str | Path) -> None:
        self.to_artifact().save(path)

    @classmethod
    def from_artifact(cls, art: ModelArtifact) -> "UniformModel":
        if art.model_kind != "uniform":
            raise IntegrityError(f"expected a uniform model artifact, got {art.model_kind!r}")
        params = params_from_bytes(art.blob)
        # Rebuild the head shape from the stored parameter shapes.
        dense_shapes = [p.value.shape for p in params if p.name.endswith(".w")]
        input_dim = dense_shapes[0][0]
        hidden = tuple(s[1] for s in dense_shapes[:-1])
        head = _build_head(input_dim, hidden, derive_rng(0, "reload"))
        stored = {p.name: p for p in params}
        for p in head.params():
            p.value[...] = stored[p.name].value
        metrics = {}
        if art.fields.get("metrics", "-") != "-":
            metrics = dict(kv.split("=", 1) for kv in art.fields["metrics"].split(";"))
        return cls(
            backbone_name=art.fields["backbone"],
            backbone_digest=art.fields["backbone_digest"],
            head=head,
            config_digest=art.fields["config_digest"],
            train_digest=art.fields["train_digest"],
            metrics=metrics,
            schema_version=art.fields.get("schema", SCHEMA_VERSION),
        )

    @classmethod
    def load(cls, path: str | Path) -> "UniformModel":
        return cls.from_artifact(ModelArtifact.load(path))


def _mean_loss(head: Sequential, x: np.ndarray, y: np.ndarray) -> float:
    logits = head.forward(x)
    loss, _ = sigmoid_bce(logits, y)
    return loss


def train_uniform(
    records: Sequence[ImageRecord],
    labels: Sequence[bool],
    config: TrainConfig,
    backbone: EmbeddingBackbone,
    cache: Optional[EmbeddingCache] = None,
) -> UniformModel:
    """Train the FC head on frozen-backbone embeddings.

    Deterministic in config.seed (initialization and batch order), with
    early stopping on training loss after ``patience`` stale epochs.
    """
    if len(records) != len(labels):
        raise ConfigError("records and labels must have equal length")
    y = np.asarray(labels, dtype=np.float32)
    if len(records) < 2 or len(set(y.tolist())) < 2:
        raise TrainingError("need at least one example of each class")

    cache = cache if cache is not None else EmbeddingCache()
    x = cache.embed_records(backbone, records).astype(np.float32)

    head = _build_head(backbone.output_dim, config.hidden, derive_rng(config.seed, "uniform-init"))
    model = UniformModel(
        backbone_name=backbone.name,
        backbone_digest=backbone.digest,
        head=head,
        config_digest=config.digest,
        train_digest=ids_digest([r.image_id for r in records]),
        _backbone=backbone,
    )

    initial_loss = _mean_loss(head, x, y)
    if config.epochs == 0:
        model.metrics = {"initial_loss": repr(initial_loss), "final_loss": repr(initial_loss)}
        return model

    opt = Adam(head.params(), lr=config.learning_rate)
    order_rng = derive_rng(config.seed, "uniform-order")
    n = len(records)
    best = np.inf
    stale = 0
    epoch_loss = initial_loss
    for _epoch in range(config.epochs):
        order = np.arange(n)
        order_rng.shuffle(order)
        total = 0.0
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            opt.zero_grad()
            logits = head.forward(x[idx])
            loss, dlogits = sigmoid_bce(logits, y[idx])
            head.backward(dlogits)
            opt.step()
            total += loss * len(idx)
        epoch_loss = total / n
        if epoch_loss < best - 1e-6:
            best = epoch_loss
            stale = 0
        else:
            stale += 1
            if stale >= config.patience:
                break

    final_loss = _mean_loss(head, x, y)
    if not final_loss < initial_loss:
        raise TrainingError(
            f"training loss did not decrease ({initial_loss:.4f} -> {final_loss:.4f})"
        )
    model.metrics = {"initial_loss": repr(initial_loss), "final_loss": repr(final_loss)}
    return model


def predict_uniform(model: UniformModel, block: np.ndarray) -> float:
    """Probability that the image contains a school uniform."""
    return model.predict_proba(block)


def classify_uniform(model: UniformModel, block: np.ndarray, threshold: float = 0.5) -> bool:
    """Hard decision: true iff probability >= threshold."""
    if not 0.0 <= threshold <= 1.0:
        raise ConfigError(f"threshold must lie in [0, 1], got {threshold}")
    return model.predict_proba(block) >= threshold
