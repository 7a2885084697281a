import numpy as np
import pytest

from uniformid.artifacts import ids_digest
from uniformid.attributes import AttributeTrainConfig
from uniformid.backbones import EmbeddingCache, FakeBackbone
from uniformid.datafactory.splits import DatasetSplit, holdout_split
from uniformid.errors import DataError, LeakageError
from uniformid.evaluation import (
    binary_metrics,
    encode_attribute_report,
    encode_loso_report,
    run_attribute_comparison,
    run_holdout_eval,
    run_loso_study,
)
from uniformid.schema import ITEMS
from uniformid.uniform import TrainConfig, train_uniform


class TestBinaryMetrics:
    def test_hand_case(self):
        m = binary_metrics([1, 1, 0, 0], [1, 0, 0, 0])
        assert m.accuracy == 0.75
        assert m.precision == 0.5
        assert m.recall == 1.0
        assert m.f1 == pytest.approx(2 / 3)
        assert m.support_positive == 1 and m.support_negative == 3

    def test_perfect(self):
        m = binary_metrics([1, 0, 1], [1, 0, 1])
        assert (m.accuracy, m.precision, m.recall, m.f1) == (1.0, 1.0, 1.0, 1.0)

    def test_all_negative_convention(self):
        m = binary_metrics([0, 0, 0], [1, 0, 1])
        assert m.recall == 0.0 and m.f1 == 0.0

    def test_length_mismatch(self):
        with pytest.raises(DataError):
            binary_metrics([1], [1, 0])
        with pytest.raises(DataError):
            binary_metrics([], [])

    def test_accuracy_matches_confusion_recount_1000(self):
        rng = np.random.default_rng(0)
        for _ in range(1000):
            n = int(rng.integers(1, 40))
            preds = rng.random(n) > 0.5
            truths = rng.random(n) > 0.5
            m = binary_metrics(preds.tolist(), truths.tolist())
            # Brute-force confusion recount.
            tp = fn = fp = tn = 0
            for p, t in zip(preds, truths):
                if p and t:
                    tp += 1
                elif not p and t:
                    fn += 1
                elif p and not t:
                    fp += 1
                else:
                    tn += 1
            assert m.accuracy == (tp + tn) / n
            for v in (m.accuracy, m.precision, m.recall, m.f1):
                assert 0.0 <= v <= 1.0


@pytest.fixture(scope="module")
def trained_on_split(small_synth):
    _c, _r, dataset = small_synth
    split = holdout_split(dataset.records, 0.8, seed=1)
    by_id = {r.image_id: r for r in dataset.records}
    train = [by_id[i] for i in split.train]
    cache = EmbeddingCache()
    model = train_uniform(
        train,
        [r.ground_truth.uniform_flag for r in train],
        TrainConfig(epochs=8, seed=1),
        FakeBackbone(),
        cache,
    )
    return model, split, dataset, cache


class TestHoldoutEval:
    def test_runs_and_scores(self, trained_on_split):
        model, split, dataset, cache = trained_on_split
        m = run_holdout_eval(model, split, dataset.records, cache)
        assert 0.0 <= m.accuracy <= 1.0
        assert m.support_positive + m.support_negative == len(split.test)

    def test_leakage_detected(self, trained_on_split):
        model, split, dataset, cache = trained_on_split
        # Move one test id into the train side: digest no longer matches.
        contaminated = DatasetSplit(
            train=split.train + (split.test[0],),
            test=split.test[1:],
            fold_id="bad",
        )
        with pytest.raises(LeakageError):
            run_holdout_eval(model, contaminated, dataset.records, cache)
        assert model.train_digest == ids_digest(split.train)

    def test_empty_test_rejected(self, trained_on_split):
        model, split, dataset, cache = trained_on_split
        empty = DatasetSplit(train=split.train, test=(), fold_id="empty")
        with pytest.raises(DataError):
            run_holdout_eval(model, empty, dataset.records, cache)


class TestLosoStudy:
    def test_structure_and_no_leakage(self, small_synth):
        _c, registry, dataset = small_synth
        cache = EmbeddingCache()
        report = run_loso_study(
            dataset.records,
            registry,
            TrainConfig(epochs=6, seed=2),
            FakeBackbone(),
            cache,
        )
        assert len(report.folds) == len(registry.profiles)
        assert {f.held_out_school for f in report.folds} == set(registry.school_ids)
        for fold in report.folds:
            assert 0.0 <= fold.seen.accuracy <= 1.0
            assert 0.0 <= fold.unseen.accuracy <= 1.0
        gap = report.gap("accuracy")
        assert gap == report.mean("accuracy", "seen") - report.mean("accuracy", "unseen")

    def test_deterministic_report(self, small_synth):
        _c, registry, dataset = small_synth
        kwargs = dict(records=dataset.records, registry=registry, backbone=FakeBackbone())
        a = run_loso_study(config=TrainConfig(epochs=3, seed=5), cache=EmbeddingCache(), **kwargs)
        b = run_loso_study(config=TrainConfig(epochs=3, seed=5), cache=EmbeddingCache(), **kwargs)
        assert encode_loso_report(a) == encode_loso_report(b)

    def test_single_school_fails(self, small_synth):
        from uniformid.schema import SchoolRegistry

        _c, registry, dataset = small_synth
        one = SchoolRegistry(profiles=registry.profiles[:1])
        records = [r for r in dataset.records if r.school_id in (None, one.profiles[0].school_id)]
        with pytest.raises(DataError):
            run_loso_study(records, one, TrainConfig(epochs=1), FakeBackbone())


class TestAttributeComparison:
    def test_report_schema_and_baseline_consistency(self, small_synth):
        _c, _r, dataset = small_synth
        labels = {r.image_id: r.ground_truth.label for r in dataset.records}
        config = AttributeTrainConfig(conv_channels=(4,), head_hidden=8, epochs=1, seed=3)
        report = run_attribute_comparison(dataset.records, labels, config)
        assert len(report.rows) == 6
        assert [row.item for row in report.rows] == list(ITEMS)
        for row in report.rows:
            for v in (
                row.model_accuracy,
                row.single_label_accuracy,
                row.random_expected,
                row.random_sampled,
            ):
                assert 0.0 <= v <= 1.0
            # analytic vs one sampled draw: 3 sigma on the test support
            n = report.test_size
            sigma = np.sqrt(max(row.random_expected * (1 - row.random_expected), 1e-12) / n)
            assert abs(row.random_sampled - row.random_expected) <= 4 * sigma + 0.05
        text = encode_attribute_report(report)
        assert text.startswith("#uniformid.v1 kind=attribute_comparison_report")

    def test_missing_labels_rejected(self, small_synth):
        _c, _r, dataset = small_synth
        labels = {r.image_id: r.ground_truth.label for r in dataset.records[:-1]}
        with pytest.raises(DataError):
            run_attribute_comparison(
                dataset.records, labels, AttributeTrainConfig(epochs=0)
            )
