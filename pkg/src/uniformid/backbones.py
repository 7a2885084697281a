"""Embedding backbones and the frozen-embedding cache.

Two implementations ship:

* ``FakeBackbone`` — a deterministic random projection of block-averaged
  pixels.  No training, instant, used for fast tests.
* ``ConvBackbone`` — a real CNN whose weights are pretrained on a
  procedurally generated pretext task (color x clutter classification)
  and loaded from a local weights file.  This keeps the whole pipeline
  offline: no downloaded model zoo weights are required anywhere.

Backbones are frozen: training downstream heads never touches them, and
their identity is (name, parameter digest).
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path
from threading import Lock
from typing import Protocol, Sequence

import numpy as np

from .artifacts import ModelArtifact
from .errors import ConfigError, IntegrityError, TrainingError
from .nn import Adam, Conv2d, Dense, Flatten, ReLU, Sequential, derive_rng
from .nn.losses import softmax_cross_entropy
from .nn.net import params_digest, params_from_bytes, params_to_bytes
from .preprocessing import INPUT_SIZE, resize_uint8
from .schema import ImageRecord


class EmbeddingBackbone(Protocol):
    name: str
    output_dim: int

    @property
    def digest(self) -> str: ...

    def embed(self, blocks: np.ndarray) -> np.ndarray:
        """(N, 224, 224, 3) float32 in [0,1] -> (N, output_dim) float32."""
        ...


class FakeBackbone:
    """Fixed random projection of 16x16 block-averaged pixels."""

    name = "fake-projection"

    def __init__(self, output_dim: int = 256, seed: int = 61444):
        self.output_dim = output_dim
        rng = derive_rng(seed, "fake-backbone")
        self._w = rng.normal(0.0, 1.0 / np.sqrt(768), size=(768, output_dim)).astype(np.float32)
        self._digest = hashlib.sha256(self._w.tobytes()).hexdigest()

    @property
    def digest(self) -> str:
        return self._digest

    def embed(self, blocks: np.ndarray) -> np.ndarray:
        n, h, w, _ = blocks.shape
        if (h, w) != (INPUT_SIZE, INPUT_SIZE):
            raise ConfigError(f"backbone expects {INPUT_SIZE}x{INPUT_SIZE} inputs")
        # 224 = 16 * 14: average each 14x14 block.
        x = blocks.reshape(n, 16, 14, 16, 14, 3).mean(axis=(2, 4))
        flat = x.reshape(n, 768).astype(np.float32)
        return np.tanh(flat @ self._w)


_TRUNK_CHANNELS = (8, 16, 32, 32)


def _build_conv_trunk(rng, output_dim: int) -> Sequential:
    layers: list = []
    c_in = 3
    for i, c_out in enumerate(_TRUNK_CHANNELS):
        layers.append(Conv2d(c_in, c_out, kernel=3, stride=2, pad=1, rng=rng, name=f"trunk{i}"))
        layers.append(ReLU())
        c_in = c_out
    layers.append(Flatten())
    # 224 -> 112 -> 56 -> 28 -> 14 spatial; 14*14*32 = 6272 features.
    layers.append(Dense(14 * 14 * _TRUNK_CHANNELS[-1], output_dim, rng=rng, name="embed"))
    layers.append(ReLU())
    return Sequential(layers)


class ConvBackbone:
    """CNN feature extractor loaded from a local pretrained weights file."""

    name = "conv-pretext"

    def __init__(self, trunk: Sequential, output_dim: int):
        self.output_dim = output_dim
        self._trunk = trunk
        self._digest = params_digest(trunk.params())

    @property
    def digest(self) -> str:
        return self._digest

    @classmethod
    def load(cls, weights_path: str | Path) -> "ConvBackbone":
        art = ModelArtifact.load(weights_path)
        if art.model_kind != "backbone":
            raise IntegrityError(f"{weights_path}: not a backbone artifact")
        output_dim = int(art.fields["output_dim"])
        trunk = _build_conv_trunk(derive_rng(0, "conv-backbone-shape"), output_dim)
        stored = {p.name: p for p in params_from_bytes(art.blob)}
        for p in trunk.params():
            if p.name not in stored:
                raise IntegrityError(f"backbone weights missing parameter {p.name}")
            if stored[p.name].value.shape != p.value.shape:
                raise IntegrityError(f"backbone parameter {p.name} has wrong shape")
            p.value[...] = stored[p.name].value
        return cls(trunk=trunk, output_dim=output_dim)

    def embed(self, blocks: np.ndarray) -> np.ndarray:
        n = blocks.shape[0]
        out = np.empty((n, self.output_dim), dtype=np.float32)
        for start in range(0, n, 32):
            batch = blocks[start : start + 32]
            x = np.ascontiguousarray(batch.transpose(0, 3, 1, 2).astype(np.float32))
            out[start : start + batch.shape[0]] = self._trunk.forward(x)
        return out


def _pretext_image(rng: np.random.Generator) -> tuple[np.ndarray, int]:
    """One pretext sample: (image, class). 12 classes = 6 colors x clutter."""
    from .datafactory.palettes import ANCHORS
    from .schema import ColorClass

    wearable = [c for c in ColorClass if c is not ColorClass.NO_COLOR]
    img = np.zeros((INPUT_SIZE, INPUT_SIZE, 3), dtype=np.uint8)
    cluttered = rng.random() < 0.5
    if cluttered:
        img[:, :] = tuple(int(v) for v in rng.integers(60, 220, size=3))
        for _ in range(int(rng.integers(5, 11))):
            w = int(rng.integers(20, 100))
            h = int(rng.integers(20, 100))
            x = int(rng.integers(0, INPUT_SIZE - w))
            y = int(rng.integers(0, INPUT_SIZE - h))
            img[y : y + h, x : x + w] = tuple(int(v) for v in rng.integers(0, 256, size=3))
    else:
        img[:, :] = tuple(int(v) for v in rng.integers(190, 220, size=3))

    target = wearable[int(rng.integers(len(wearable)))]
    anchors = ANCHORS[target]
    anchor = anchors[int(rng.integers(len(anchors)))]
    w = int(rng.integers(50, 120))
    h = int(rng.integers(50, 120))
    x = int(rng.integers(0, INPUT_SIZE - w))
    y = int(rng.integers(0, INPUT_SIZE - h))
    img[y : y + h, x : x + w] = anchor
    return img, target.value * 2 + (1 if cluttered else 0)


def pretrain_conv_backbone(
    weights_path: str | Path,
    seed: int = 7,
    output_dim: int = 128,
    num_images: int = 1200,
    epochs: int = 3,
    batch_size: int = 32,
    lr: float = 1e-3,
) -> ConvBackbone:
    """Train the CNN trunk on the pretext task and save a weights file."""
    rng_data = derive_rng(seed, "pretext-data")
    images = np.empty((num_images, INPUT_SIZE, INPUT_SIZE, 3), dtype=np.uint8)
    targets = np.empty(num_images, dtype=np.int64)
    for i in range(num_images):
        images[i], targets[i] = _pretext_image(rng_data)

    trunk = _build_conv_trunk(derive_rng(seed, "pretext-init"), output_dim)
    head = Dense(output_dim, 12, rng=derive_rng(seed, "pretext-head"), name="pretext")
    params = trunk.params() + head.params()
    opt = Adam(params, lr=lr)
    order_rng = derive_rng(seed, "pretext-order")

    last_loss = None
    for _epoch in range(epochs):
        order = np.arange(num_images)
        order_rng.shuffle(order)
        total = 0.0
        for start in range(0, num_images, batch_size):
            idx = order[start : start + batch_size]
            x = np.ascontiguousarray(
                (images[idx].astype(np.float32) / 255.0).transpose(0, 3, 1, 2)
            )
            opt.zero_grad()
            feats = trunk.forward(x)
            logits = head.forward(feats)
            loss, dlogits = softmax_cross_entropy(logits, targets[idx])
            trunk.backward(head.backward(dlogits))
            opt.step()
            total += loss * len(idx)
        last_loss = total / num_images
    if epochs > 0 and last_loss is not None and not np.isfinite(last_loss):
        raise TrainingError("pretext training diverged")

    art = ModelArtifact(
        model_kind="backbone",
        fields={"output_dim": str(output_dim), "pretext_seed": str(seed)},
        blob=params_to_bytes(trunk.params()),
    )
    art.save(weights_path)
    return ConvBackbone.load(weights_path)


@dataclass
class _CacheEntry:
    vector: np.ndarray


class EmbeddingCache:
    """Frozen-backbone embeddings keyed by (backbone digest, image_id).

    Concurrent reads are free; inserts are serialized.  Optionally
    persisted to an .npz so LOSO folds and repeated runs reuse work.
    """

    def __init__(self):
        self._data: dict[tuple[str, str], np.ndarray] = {}
        self._lock = Lock()

    def __len__(self) -> int:
        return len(self._data)

    def embed_records(
        self, backbone: EmbeddingBackbone, records: Sequence[ImageRecord]
    ) -> np.ndarray:
        missing = [r for r in records if (backbone.digest, r.image_id) not in self._data]
        if missing:
            blocks = np.empty((len(missing), INPUT_SIZE, INPUT_SIZE, 3), dtype=np.float32)
            for i, rec in enumerate(missing):
                blocks[i] = resize_uint8(rec).astype(np.float32) / 255.0
            vecs = backbone.embed(blocks)
            with self._lock:
                for rec, vec in zip(missing, vecs):
                    self._data[(backbone.digest, rec.image_id)] = vec
        out = np.stack([self._data[(backbone.digest, r.image_id)] for r in records])
        return out

    def save(self, path: str | Path) -> None:
        keys = sorted(self._data)
        np.savez(
            path,
            keys=np.array(["\x00".join(k) for k in keys]),
            vectors=np.stack([self._data[k] for k in keys]) if keys else np.zeros((0, 0)),
        )

    @classmethod
    def load(cls, path: str | Path) -> "EmbeddingCache":
        cache = cls()
        with np.load(path, allow_pickle=False) as data:
            keys = [tuple(k.split("\x00")) for k in data["keys"].tolist()]
            vectors = data["vectors"]
            for k, v in zip(keys, vectors):
                cache._data[k] = v
        return cache


def backbone_by_name(name: str, weights_path: str | Path | None = None) -> EmbeddingBackbone:
    if name == FakeBackbone.name:
        return FakeBackbone()
    if name == ConvBackbone.name:
        if weights_path is None:
            raise ConfigError("conv-pretext backbone needs a local weights file path")
        return ConvBackbone.load(weights_path)
    raise ConfigError(f"unknown backbone {name!r}")
