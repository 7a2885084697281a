"""Evaluation protocols: holdout metrics, the two-scenario
leave-one-school-out study, and the attribute baseline comparison.

Leakage is checked mechanically: every trained model records a digest of
its training image-id set, and evaluators refuse to score when the digest
does not match the split they are given.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import textio
from .artifacts import ids_digest
from .attributes import (
    AttributeTrainConfig,
    abundance_profile,
    random_baseline_expected_accuracy,
    random_baseline_sample,
    train_attribute_net,
    train_single_label,
)
from .backbones import EmbeddingBackbone, EmbeddingCache
from .datafactory.splits import DatasetSplit, holdout_split, loso_splits
from .errors import DataError, LeakageError
from .preprocessing import resize_uint8
from .schema import (
    ITEMS,
    AttributeLabel,
    ClothingItem,
    ImageRecord,
    SchoolRegistry,
    distribution_argmax,
)
from .uniform import TrainConfig, UniformModel, train_uniform


@dataclass(frozen=True)
class MetricSet:
    accuracy: float
    precision: float
    recall: float
    f1: float
    support_positive: int
    support_negative: int

    def __post_init__(self):
        for name in ("accuracy", "precision", "recall", "f1"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise DataError(f"{name} out of [0,1]: {v}")


def binary_metrics(predictions: Sequence[bool], truths: Sequence[bool]) -> MetricSet:
    """Standard binary suite; positive class = uniform present.

    Degenerate conventions (documented): precision = 0 when nothing is
    predicted positive, recall = 0 when nothing is positive, f1 = 0 when
    precision + recall = 0.
    """
    if len(predictions) != len(truths) or len(truths) == 0:
        raise DataError("predictions and truths must be equal-length and non-empty")
    p = np.asarray(predictions, dtype=bool)
    t = np.asarray(truths, dtype=bool)
    tp = int(np.sum(p & t))
    tn = int(np.sum(~p & ~t))
    fp = int(np.sum(p & ~t))
    fn = int(np.sum(~p & t))
    accuracy = (tp + tn) / len(t)
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return MetricSet(
        accuracy=accuracy,
        precision=precision,
        recall=recall,
        f1=f1,
        support_positive=tp + fn,
        support_negative=tn + fp,
    )


def _records_by_id(records: Sequence[ImageRecord]) -> dict[str, ImageRecord]:
    return {r.image_id: r for r in records}


def run_holdout_eval(
    model: UniformModel,
    split: DatasetSplit,
    records: Sequence[ImageRecord],
    cache: Optional[EmbeddingCache] = None,
    threshold: float = 0.5,
) -> MetricSet:
    """Score a trained uniform model on the split's test side.

    Refuses to run when the model's training digest is not exactly the
    split's train side (train/test contamination evidence).
    """
    if not split.test:
        raise DataError("empty test set")
    if model.train_digest != ids_digest(split.train):
        raise LeakageError(
            "model training set does not match the split's train side; "
            "refusing to evaluate (possible train/test contamination)"
        )
    by_id = _records_by_id(records)
    test_records = [by_id[i] for i in split.test]
    cache = cache if cache is not None else EmbeddingCache()
    emb = cache.embed_records(model.backbone, test_records)
    probs = model.predict_from_embeddings(emb)
    preds = probs >= threshold
    truths = [by_id[i].ground_truth.uniform_flag for i in split.test]
    return binary_metrics(preds.tolist(), truths)


@dataclass(frozen=True)
class LosoFoldResult:
    held_out_school: str
    seen: MetricSet
    unseen: MetricSet


@dataclass(frozen=True)
class LosoReport:
    folds: tuple[LosoFoldResult, ...]

    def mean(self, metric: str, scenario: str) -> float:
        return float(np.mean([getattr(getattr(f, scenario), metric) for f in self.folds]))

    def gap(self, metric: str) -> float:
        return self.mean(metric, "seen") - self.mean(metric, "unseen")


def run_loso_study(
    records: Sequence[ImageRecord],
    registry: SchoolRegistry,
    config: TrainConfig,
    backbone: EmbeddingBackbone,
    cache: Optional[EmbeddingCache] = None,
    threshold: float = 0.5,
) -> LosoReport:
    """Train one model per fold and score both test scenarios.

    The shared embedding cache makes the K folds head-only retrainings.
    """
    splits = loso_splits(records, registry, seed=config.seed)
    by_id = _records_by_id(records)
    cache = cache if cache is not None else EmbeddingCache()

    results = []
    for i in range(0, len(splits), 2):
        seen_split, unseen_split = splits[i], splits[i + 1]
        assert seen_split.held_out_school == unseen_split.held_out_school
        train_records = [by_id[j] for j in seen_split.train]
        labels = [r.ground_truth.uniform_flag for r in train_records]
        model = train_uniform(train_records, labels, config, backbone, cache)
        seen = run_holdout_eval(model, seen_split, records, cache, threshold)
        unseen = run_holdout_eval(model, unseen_split, records, cache, threshold)
        results.append(
            LosoFoldResult(
                held_out_school=seen_split.held_out_school, seen=seen, unseen=unseen
            )
        )
    return LosoReport(folds=tuple(results))


@dataclass(frozen=True)
class AttributeComparisonRow:
    item: ClothingItem
    model_accuracy: float
    single_label_accuracy: float
    random_expected: float
    random_sampled: float


@dataclass(frozen=True)
class AttributeComparisonReport:
    rows: tuple[AttributeComparisonRow, ...]
    train_size: int
    test_size: int

    def row(self, item: ClothingItem) -> AttributeComparisonRow:
        return self.rows[item.value]


def run_attribute_comparison(
    records: Sequence[ImageRecord],
    labels: dict[str, AttributeLabel],
    config: AttributeTrainConfig,
    train_fraction: float = 0.8,
) -> AttributeComparisonReport:
    """Multi-label model vs single-label models vs proportional-random.

    The abundance profile for the random baseline is measured on the
    *test* labels, per item, matching the protocol it reproduces.
    """
    labeled = [r for r in records if r.image_id in labels]
    if len(labeled) != len(records):
        raise DataError("every record needs a verified label")
    split = holdout_split(records, train_fraction, seed=config.seed)
    by_id = _records_by_id(records)

    def stack(ids):
        blocks = np.empty((len(ids), 224, 224, 3), dtype=np.uint8)
        for i, image_id in enumerate(ids):
            blocks[i] = resize_uint8(by_id[image_id])
        return blocks

    train_blocks = stack(split.train)
    test_blocks = stack(split.test)
    train_labels = [labels[i] for i in split.train]
    test_labels = [labels[i] for i in split.test]

    net = train_attribute_net(train_blocks, train_labels, config, image_ids=split.train)
    dists = net.predict_batch(test_blocks)
    predicted = [distribution_argmax(d) for d in dists]

    profile = abundance_profile(test_labels)
    expected = random_baseline_expected_accuracy(profile)
    sampled = random_baseline_sample(profile, test_labels, seed=config.seed)

    rows = []
    for it in ITEMS:
        truth = np.array([lab.color(it).value for lab in test_labels])
        model_acc = float(np.mean([p.color(it).value for p in predicted] == truth))
        single = train_single_label(train_blocks, train_labels, it, config)
        single_acc = float(np.mean(single.predict_batch(test_blocks) == truth))
        rows.append(
            AttributeComparisonRow(
                item=it,
                model_accuracy=model_acc,
                single_label_accuracy=single_acc,
                random_expected=expected[it],
                random_sampled=sampled[it],
            )
        )
    return AttributeComparisonReport(
        rows=tuple(rows), train_size=len(split.train), test_size=len(split.test)
    )


# -- report serialization -----------------------------------------------------


def _metric_line(prefix: str, m: MetricSet) -> str:
    return (
        f"{prefix}: accuracy={m.accuracy!r} precision={m.precision!r} "
        f"recall={m.recall!r} f1={m.f1!r} support_pos={m.support_positive} "
        f"support_neg={m.support_negative}"
    )


def encode_metricset(m: MetricSet, kind: str = "holdout_report") -> str:
    return "\n".join([textio.header(kind), _metric_line("metrics", m)]) + "\n"


def encode_loso_report(report: LosoReport) -> str:
    lines = [textio.header("loso_report")]
    for fold in report.folds:
        lines.append(f"fold: {fold.held_out_school}")
        lines.append(_metric_line("seen", fold.seen))
        lines.append(_metric_line("unseen", fold.unseen))
    for metric in ("accuracy", "precision", "recall", "f1"):
        lines.append(
            f"aggregate: {metric} seen={report.mean(metric, 'seen')!r} "
            f"unseen={report.mean(metric, 'unseen')!r} gap={report.gap(metric)!r}"
        )
    return "\n".join(lines) + "\n"


def encode_attribute_report(report: AttributeComparisonReport) -> str:
    lines = [
        textio.header("attribute_comparison_report"),
        f"train_size: {report.train_size}",
        f"test_size: {report.test_size}",
    ]
    for row in report.rows:
        lines.append(
            f"{row.item.name}: model={row.model_accuracy!r} "
            f"single={row.single_label_accuracy!r} "
            f"random_expected={row.random_expected!r} "
            f"random_sampled={row.random_sampled!r}"
        )
    return "\n".join(lines) + "\n"


def render_metric_table(rows: list[tuple[str, MetricSet]]) -> str:
    """Fixed-width summary table for CLI output."""
    header = f"{'scenario':<28} {'acc':>7} {'prec':>7} {'rec':>7} {'f1':>7}"
    out = [header, "-" * len(header)]
    for name, m in rows:
        out.append(
            f"{name:<28} {m.accuracy:>7.4f} {m.precision:>7.4f} {m.recall:>7.4f} {m.f1:>7.4f}"
        )
    return "\n".join(out)
