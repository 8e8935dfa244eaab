import pytest
import torch

from faqembed import ConfigError, DataError
from faqembed.model import HashEmbedder, bucket_of, load_model, save_model
from faqembed.presets import MODEL_PRESETS, get_preset
from faqembed.textprep import tokens_of


class TestTokens:
    def test_devanagari_words_stay_whole(self):
        assert tokens_of("राहदानी कहाँ बन्छ ?") == ["राहदानी", "कहाँ", "बन्छ"]

    def test_lowercasing_and_digits(self):
        assert tokens_of("MRP Form 34।") == ["mrp", "form", "34"]

    def test_empty(self):
        assert tokens_of("") == []


class TestBuckets:
    def test_stable_across_calls(self):
        assert bucket_of("राहदानी", 4096) == bucket_of("राहदानी", 4096)

    def test_within_range(self):
        for tok in ("a", "b", "राहदानी", "x" * 50):
            assert 0 <= bucket_of(tok, 128) < 128


class TestHashEmbedder:
    def test_output_is_unit_norm(self):
        model = HashEmbedder(n_buckets=256, dim=32)
        vecs = model.encode(["केही पाठ यहाँ", "अर्को वाक्य"], kind="passage")
        norms = torch.linalg.norm(vecs, dim=1)
        assert torch.allclose(norms, torch.ones(2), atol=1e-6)

    def test_deterministic_for_same_text(self):
        model = HashEmbedder(n_buckets=256, dim=32)
        a = model.encode(["उही पाठ"], kind="passage")
        b = model.encode(["उही पाठ"], kind="passage")
        assert torch.equal(a, b)

    def test_prefixes_change_embeddings(self):
        model = HashEmbedder(n_buckets=256, dim=32, query_prefix="query: ")
        q = model.encode(["पाठ"], kind="query")
        p = model.encode(["पाठ"], kind="passage")
        assert not torch.allclose(q, p)

    def test_empty_text_rejected(self):
        model = HashEmbedder(n_buckets=256, dim=32)
        with pytest.raises(DataError, match="no tokens"):
            model.encode(["।।।"], kind="passage")

    def test_bad_kind_rejected(self):
        model = HashEmbedder(n_buckets=256, dim=32)
        with pytest.raises(DataError, match="kind"):
            model.encode(["x"], kind="document")

    def test_save_load_round_trip(self, tmp_path):
        model = HashEmbedder(n_buckets=128, dim=16, query_prefix="q: ", model_name="unit")
        save_model(model, tmp_path / "ckpt")
        again = load_model(tmp_path / "ckpt")
        assert again.model_name == "unit"
        assert again.query_prefix == "q: "
        a = model.encode(["नमूना पाठ"], kind="query")
        b = again.encode(["नमूना पाठ"], kind="query")
        assert torch.allclose(a, b)

    def test_load_rejects_non_checkpoint(self, tmp_path):
        with pytest.raises(DataError, match="checkpoint"):
            load_model(tmp_path)


class TestPresets:
    def test_e5_base_row(self):
        preset = get_preset("intfloat/e5-base")
        assert preset.batch_size == 8
        assert preset.learning_rate == pytest.approx(3e-5)
        assert preset.query_prefix == "query: "

    def test_all_presets_batch_size_eight(self):
        assert all(p.batch_size == 8 for p in MODEL_PRESETS.values())

    def test_learning_rates(self):
        expected = {
            "Yunika/sentence-transformer-nepali": 1e-5,
            "Syubraj/sentence_similarity_nepali": 2e-5,
            "universalml/Nepali_Embedding_Model": 1e-5,
            "jangedoo/all-MiniLM-L6-v2-nepali": 1e-5,
            "intfloat/e5-small": 4e-5,
            "intfloat/e5-base": 3e-5,
            "intfloat/e5-large": 1e-5,
        }
        for name, lr in expected.items():
            assert get_preset(name).learning_rate == pytest.approx(lr)

    def test_unknown_model_rejected(self):
        with pytest.raises(ConfigError, match="unknown model"):
            get_preset("no/such-model")
