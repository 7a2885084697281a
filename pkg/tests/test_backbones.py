import numpy as np
import pytest

from uniformid.backbones import (
    ConvBackbone,
    EmbeddingCache,
    FakeBackbone,
    backbone_by_name,
    pretrain_conv_backbone,
)
from uniformid.errors import ConfigError, IntegrityError


@pytest.fixture(scope="module")
def tiny_conv_backbone(tmp_path_factory):
    path = tmp_path_factory.mktemp("bb") / "tiny-backbone.uidm"
    backbone = pretrain_conv_backbone(path, seed=3, output_dim=32, num_images=48, epochs=1)
    return path, backbone


class TestFakeBackbone:
    def test_deterministic_embeddings(self):
        a = FakeBackbone()
        b = FakeBackbone()
        assert a.digest == b.digest
        x = np.random.default_rng(0).random((3, 224, 224, 3)).astype(np.float32)
        assert np.array_equal(a.embed(x), b.embed(x))

    def test_output_dim(self):
        backbone = FakeBackbone(output_dim=64)
        x = np.zeros((2, 224, 224, 3), dtype=np.float32)
        assert backbone.embed(x).shape == (2, 64)

    def test_rejects_wrong_shape(self):
        with pytest.raises(ConfigError):
            FakeBackbone().embed(np.zeros((1, 64, 64, 3), dtype=np.float32))


class TestConvBackbone:
    def test_save_load_same_embeddings(self, tiny_conv_backbone):
        path, backbone = tiny_conv_backbone
        reloaded = ConvBackbone.load(path)
        assert reloaded.digest == backbone.digest
        x = np.random.default_rng(1).random((2, 224, 224, 3)).astype(np.float32)
        assert np.array_equal(reloaded.embed(x), backbone.embed(x))

    def test_tampered_weights_rejected(self, tiny_conv_backbone, tmp_path):
        path, _ = tiny_conv_backbone
        raw = bytearray(path.read_bytes())
        raw[-3] ^= 0xFF
        bad = tmp_path / "tampered.uidm"
        bad.write_bytes(bytes(raw))
        with pytest.raises(IntegrityError):
            ConvBackbone.load(bad)

    def test_by_name_requires_weights(self):
        with pytest.raises(ConfigError):
            backbone_by_name("conv-pretext")

    def test_unknown_name(self):
        with pytest.raises(ConfigError):
            backbone_by_name("vgg-nonexistent")


class TestEmbeddingCache:
    def test_cache_hits_skip_recompute(self, small_synth):
        _c, _r, dataset = small_synth

        class CountingBackbone(FakeBackbone):
            calls = 0

            def embed(self, blocks):
                CountingBackbone.calls += blocks.shape[0]
                return super().embed(blocks)

        backbone = CountingBackbone()
        cache = EmbeddingCache()
        records = dataset.records[:10]
        first = cache.embed_records(backbone, records)
        assert CountingBackbone.calls == 10
        second = cache.embed_records(backbone, records)
        assert CountingBackbone.calls == 10  # no recompute
        assert np.array_equal(first, second)
        assert len(cache) == 10

    def test_cache_keyed_by_backbone_digest(self, small_synth):
        _c, _r, dataset = small_synth
        cache = EmbeddingCache()
        records = dataset.records[:4]
        a = cache.embed_records(FakeBackbone(output_dim=16), records)
        b = cache.embed_records(FakeBackbone(output_dim=8), records)
        assert a.shape[1] == 16 and b.shape[1] == 8
        assert len(cache) == 8

    def test_save_load_roundtrip(self, small_synth, tmp_path):
        _c, _r, dataset = small_synth
        cache = EmbeddingCache()
        backbone = FakeBackbone()
        vecs = cache.embed_records(backbone, dataset.records[:5])
        cache.save(tmp_path / "cache.npz")
        loaded = EmbeddingCache.load(tmp_path / "cache.npz")
        assert np.array_equal(loaded.embed_records(backbone, dataset.records[:5]), vecs)
