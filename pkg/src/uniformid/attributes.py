"""Multi-label multi-class attribute predictor and its two baselines.

One shared convolutional trunk feeds six per-item FC heads, each ending
in a 7-way softmax.  The joint objective is the unweighted sum of the
per-item cross-entropies.  The single-label baseline reuses the exact
trunk/head architectures with one head per model; the random baseline
predicts each item's color from its abundance in a reference label set.
"""

from __future__ import annotations

import hashlib
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import textio
from .artifacts import ModelArtifact, ids_digest
from .clock import now_iso
from .errors import ConfigError, IntegrityError, SchemaViolation, TrainingError
from .nn import Adam, Conv2d, Dense, Flatten, ReLU, Sequential, derive_rng, softmax
from .nn.losses import softmax_cross_entropy
from .nn.net import params_from_bytes, params_to_bytes
from .preprocessing import INPUT_SIZE
from .schema import (
    ITEMS,
    NUM_COLORS,
    NUM_ITEMS,
    SCHEMA_VERSION,
    AttributeDistribution,
    AttributeLabel,
    ClothingItem,
)


@dataclass(frozen=True)
class AttributeTrainConfig:
    conv_channels: tuple[int, ...] = (8, 16, 32)
    head_hidden: int = 32
    learning_rate: float = 1e-3
    batch_size: int = 32
    epochs: int = 2
    seed: int = 0

    def __post_init__(self):
        if any(c < 1 for c in self.conv_channels) or self.head_hidden < 1:
            raise ConfigError("channel/hidden sizes must be positive")
        if self.learning_rate <= 0 or self.batch_size < 1 or self.epochs < 0:
            raise ConfigError("learning_rate/batch_size/epochs out of range")

    @property
    def digest(self) -> str:
        canon = (
            f"conv={','.join(map(str, self.conv_channels))};hidden={self.head_hidden};"
            f"lr={self.learning_rate!r};batch={self.batch_size};"
            f"epochs={self.epochs};seed={self.seed}"
        )
        return hashlib.sha256(canon.encode()).hexdigest()


def _build_trunk(config: AttributeTrainConfig, rng) -> tuple[Sequential, int]:
    layers: list = []
    c_in = 3
    size = INPUT_SIZE
    for i, c_out in enumerate(config.conv_channels):
        layers.append(Conv2d(c_in, c_out, kernel=3, stride=2, pad=1, rng=rng, name=f"conv{i}"))
        layers.append(ReLU())
        c_in = c_out
        size = (size + 1) // 2
    layers.append(Flatten())
    return Sequential(layers), size * size * c_in


def _build_head(feat_dim: int, config: AttributeTrainConfig, rng, name: str) -> Sequential:
    # Tiny init on the output layer keeps untrained heads near-uniform.
    return Sequential(
        [
            Dense(feat_dim, config.head_hidden, rng=rng, name=f"{name}.fc"),
            ReLU(),
            Dense(config.head_hidden, NUM_COLORS, rng=rng, name=f"{name}.out", init_std=0.01),
        ]
    )


def _blocks_to_nchw(blocks_u8: np.ndarray, idx: np.ndarray) -> np.ndarray:
    x = blocks_u8[idx].astype(np.float32) / 255.0
    return np.ascontiguousarray(x.transpose(0, 3, 1, 2))


@dataclass
class AttributeNet:
    trunk: Sequential
    heads: list[Sequential]  # one per ClothingItem, in item order
    config: AttributeTrainConfig
    train_digest: str = ""
    schema_version: str = SCHEMA_VERSION

    def params(self):
        out = self.trunk.params()
        for head in self.heads:
            out.extend(head.params())
        return out

    def forward_logits(self, x: np.ndarray) -> list[np.ndarray]:
        feats = self.trunk.forward(x)
        return [head.forward(feats) for head in self.heads]

    def predict_batch(self, blocks_u8: np.ndarray) -> list[AttributeDistribution]:
        out: list[AttributeDistribution] = []
        n = blocks_u8.shape[0]
        for start in range(0, n, 32):
            idx = np.arange(start, min(start + 32, n))
            logits = self.forward_logits(_blocks_to_nchw(blocks_u8, idx))
            probs = [softmax(l.astype(np.float64)) for l in logits]
            for row in range(len(idx)):
                p = np.stack([probs[i][row] for i in range(NUM_ITEMS)])
                p /= p.sum(axis=1, keepdims=True)
                out.append(AttributeDistribution(probs=p))
        return out

    def to_artifact(self) -> ModelArtifact:
        fields = {
            "schema": self.schema_version,
            "config_digest": self.config.digest,
            "conv_channels": ",".join(map(str, self.config.conv_channels)),
            "head_hidden": str(self.config.head_hidden),
            "train_digest": self.train_digest,
            "created": now_iso(),
        }
        return ModelArtifact(
            model_kind="attribute", fields=fields, blob=params_to_bytes(self.params())
        )

    def save(self, path: str | Path) -> None:
        self.to_artifact().save(path)

    @classmethod
    def load(cls, path: str | Path) -> "AttributeNet":
        art = ModelArtifact.load(path)
        if art.model_kind != "attribute":
            raise IntegrityError(f"expected an attribute artifact, got {art.model_kind!r}")
        config = AttributeTrainConfig(
            conv_channels=tuple(int(c) for c in art.fields["conv_channels"].split(",")),
            head_hidden=int(art.fields["head_hidden"]),
        )
        net = _init_attribute_net(config)
        net.train_digest = art.fields["train_digest"]
        stored = {p.name: p for p in params_from_bytes(art.blob)}
        for p in net.params():
            if p.name not in stored or stored[p.name].value.shape != p.value.shape:
                raise IntegrityError(f"artifact parameter mismatch at {p.name}")
            p.value[...] = stored[p.name].value
        return net


def _init_attribute_net(config: AttributeTrainConfig) -> AttributeNet:
    trunk, feat_dim = _build_trunk(config, derive_rng(config.seed, "attr-trunk"))
    heads = [
        _build_head(feat_dim, config, derive_rng(config.seed, f"attr-head-{it.name}"), it.name)
        for it in ITEMS
    ]
    return AttributeNet(trunk=trunk, heads=heads, config=config)


def predict_attributes(net: AttributeNet, block: np.ndarray) -> AttributeDistribution:
    """Model input block -> per-item color distribution."""
    if block.shape != (INPUT_SIZE, INPUT_SIZE, 3):
        raise ConfigError(f"input block must be {INPUT_SIZE}x{INPUT_SIZE}x3")
    u8 = np.clip(block * 255.0, 0, 255).astype(np.uint8) if block.dtype != np.uint8 else block
    return net.predict_batch(u8[None])[0]


def _targets_matrix(labels: Sequence[AttributeLabel]) -> np.ndarray:
    t = np.empty((len(labels), NUM_ITEMS), dtype=np.int64)
    for i, lab in enumerate(labels):
        for it in ITEMS:
            t[i, it.value] = lab.color(it).value
    return t


def _warn_degenerate_items(targets: np.ndarray, items: Sequence[ClothingItem]) -> None:
    for it in items:
        if len(np.unique(targets[:, it.value])) < 2:
            warnings.warn(
                f"item {it.name} has a single class in the training labels; "
                "its head will degenerate",
                stacklevel=3,
            )


def train_attribute_net(
    blocks_u8: np.ndarray,
    labels: Sequence[AttributeLabel],
    config: AttributeTrainConfig,
    image_ids: Optional[Sequence[str]] = None,
) -> AttributeNet:
    """Jointly train all six heads on the summed per-item cross-entropy.

    ``blocks_u8`` is the preprocessed uint8 stack (N, 224, 224, 3);
    normalization to [0,1] happens per batch.
    """
    n = blocks_u8.shape[0]
    if n != len(labels) or n < 1:
        raise ConfigError("blocks and labels must be non-empty and equal length")
    targets = _targets_matrix(labels)
    _warn_degenerate_items(targets, ITEMS)

    net = _init_attribute_net(config)
    net.train_digest = ids_digest(image_ids) if image_ids is not None else ""
    if config.epochs == 0:
        return net

    opt = Adam(net.params(), lr=config.learning_rate)
    order_rng = derive_rng(config.seed, "attr-order")
    for _epoch in range(config.epochs):
        order = np.arange(n)
        order_rng.shuffle(order)
        epoch_loss = 0.0
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            x = _blocks_to_nchw(blocks_u8, idx)
            opt.zero_grad()
            feats = net.trunk.forward(x)
            dfeats = np.zeros_like(feats)
            batch_loss = 0.0
            for it in ITEMS:
                logits = net.heads[it.value].forward(feats)
                loss, dlogits = softmax_cross_entropy(logits, targets[idx, it.value])
                batch_loss += loss
                dfeats += net.heads[it.value].backward(dlogits)
            net.trunk.backward(dfeats)
            opt.step()
            epoch_loss += batch_loss * len(idx)
        if not np.isfinite(epoch_loss):
            raise TrainingError("attribute training diverged")
    return net


@dataclass
class SingleLabelNet:
    """Per-item baseline with architectures identical to AttributeNet's."""

    item: ClothingItem
    trunk: Sequential
    head: Sequential
    config: AttributeTrainConfig

    def params(self):
        return self.trunk.params() + self.head.params()

    def predict_batch(self, blocks_u8: np.ndarray) -> np.ndarray:
        """(N,) predicted color ordinals for this item."""
        n = blocks_u8.shape[0]
        out = np.empty(n, dtype=np.int64)
        for start in range(0, n, 32):
            idx = np.arange(start, min(start + 32, n))
            logits = self.head.forward(self.trunk.forward(_blocks_to_nchw(blocks_u8, idx)))
            out[idx] = np.argmax(logits, axis=1)
        return out


def train_single_label(
    blocks_u8: np.ndarray,
    labels: Sequence[AttributeLabel],
    item: ClothingItem,
    config: AttributeTrainConfig,
) -> SingleLabelNet:
    n = blocks_u8.shape[0]
    if n != len(labels) or n < 1:
        raise ConfigError("blocks and labels must be non-empty and equal length")
    targets = _targets_matrix(labels)
    _warn_degenerate_items(targets, [item])

    trunk, feat_dim = _build_trunk(config, derive_rng(config.seed, f"single-trunk-{item.name}"))
    head = _build_head(
        feat_dim, config, derive_rng(config.seed, f"single-head-{item.name}"), f"single.{item.name}"
    )
    net = SingleLabelNet(item=item, trunk=trunk, head=head, config=config)
    if config.epochs == 0:
        return net

    opt = Adam(net.params(), lr=config.learning_rate)
    order_rng = derive_rng(config.seed, f"single-order-{item.name}")
    for _epoch in range(config.epochs):
        order = np.arange(n)
        order_rng.shuffle(order)
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            x = _blocks_to_nchw(blocks_u8, idx)
            opt.zero_grad()
            logits = head.forward(trunk.forward(x))
            _loss, dlogits = softmax_cross_entropy(logits, targets[idx, item.value])
            trunk.backward(head.backward(dlogits))
            opt.step()
    return net


# -- baselines ----------------------------------------------------------------


@dataclass(frozen=True)
class AbundanceProfile:
    """Per-item empirical color distribution of a label set."""

    probs: np.ndarray  # (6, 7) float64, rows sum to 1
    support: int

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=np.float64)
        if p.shape != (NUM_ITEMS, NUM_COLORS):
            raise SchemaViolation("abundance profile must be 6x7")
        if np.any(p < 0):
            raise SchemaViolation("abundance entries must be >= 0")
        if np.any(np.abs(p.sum(axis=1) - 1.0) > 1e-9):
            raise SchemaViolation("abundance rows must sum to 1 within 1e-9")
        p.flags.writeable = False
        object.__setattr__(self, "probs", p)

    def vector(self, item: ClothingItem) -> np.ndarray:
        return self.probs[item.value]


def abundance_profile(labels: Sequence[AttributeLabel]) -> AbundanceProfile:
    """p[item][c] = count(c) / N, per clothing item independently."""
    if not labels:
        raise SchemaViolation("abundance profile needs at least one label")
    counts = np.zeros((NUM_ITEMS, NUM_COLORS), dtype=np.float64)
    for lab in labels:
        for it in ITEMS:
            counts[it.value, lab.color(it).value] += 1
    return AbundanceProfile(probs=counts / len(labels), support=len(labels))


def encode_abundance(profile: AbundanceProfile) -> str:
    lines = [textio.header("abundance_profile"), f"support: {profile.support}"]
    for it in ITEMS:
        lines.append(f"{it.name}: " + " ".join(repr(float(v)) for v in profile.vector(it)))
    return "\n".join(lines) + "\n"


def decode_abundance(text: str) -> AbundanceProfile:
    body = textio.split_document(text, "abundance_profile")
    support = 0
    rows: dict[str, np.ndarray] = {}
    for ln in body:
        key, _, value = ln.partition(": ")
        if key == "support":
            support = int(value)
        else:
            rows[key] = np.array([float(v) for v in value.split(" ")], dtype=np.float64)
    probs = np.stack([rows[it.name] for it in ITEMS])
    return AbundanceProfile(probs=probs, support=support)


def random_baseline_expected_accuracy(profile: AbundanceProfile) -> dict[ClothingItem, float]:
    """Expected accuracy sum(p^2): truth and prediction both drawn from p."""
    return {it: float(np.sum(profile.vector(it) ** 2)) for it in ITEMS}


def random_baseline_sample(
    profile: AbundanceProfile, truths: Sequence[AttributeLabel], seed: int
) -> dict[ClothingItem, float]:
    """Empirical accuracy of one seeded draw of proportional predictions."""
    if not truths:
        raise SchemaViolation("need at least one truth label")
    rng = derive_rng(seed, "random-baseline")
    out: dict[ClothingItem, float] = {}
    truth_m = _targets_matrix(truths)
    for it in ITEMS:
        p = profile.vector(it)
        draws = rng.choice(NUM_COLORS, size=len(truths), p=p)
        out[it] = float(np.mean(draws == truth_m[:, it.value]))
    return out
