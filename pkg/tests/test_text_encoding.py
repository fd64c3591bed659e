"""Hashing text encoder: determinism, normalization, golden vectors."""

from functools import reduce

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from graph2img import ValidationError, encode_text, null_embedding
from graph2img.text_encoding import TextEmbedding, fnv1a64

# Known FNV-1a 64-bit vectors (public test vectors for the algorithm).
KNOWN_FNV = {b"": 0xCBF29CE484222325, b"a": 0xAF63DC4C8601EC8C, b"foobar": 0x85944171F73967E8}


def fnv1a_reference(data: bytes) -> int:
    """Independent fold-based reimplementation used as the test oracle."""
    return reduce(lambda h, b: ((h ^ b) * 0x100000001B3) % 2**64, data, 0xCBF29CE484222325)


def embedding_oracle(text: str, d: int) -> np.ndarray:
    """Straight-line reimplementation of the bucket/sign/normalize rule."""
    tokens = []
    word = ""
    for ch in text.lower():
        if ch.isalnum():
            word += ch
        elif word:
            tokens.append(word)
            word = ""
    if word:
        tokens.append(word)
    acc = np.zeros(d)
    for tok in tokens:
        h = fnv1a_reference(tok.encode("utf-8"))
        acc[h % d] += 1.0 if h < 2**63 else -1.0
    norm = np.linalg.norm(acc)
    return acc / norm if norm else acc


class TestFnv:
    def test_known_vectors(self):
        for data, expected in KNOWN_FNV.items():
            assert fnv1a64(data) == expected
            assert fnv1a_reference(data) == expected


class TestEncodeText:
    def test_empty_string_is_null_conditioning(self):
        emb = encode_text("", 16)
        assert emb.is_null
        assert np.array_equal(emb.values, np.zeros(16))
        assert np.array_equal(null_embedding(16).values, emb.values)

    def test_deterministic_and_unit_norm(self):
        a = encode_text("bear be in forest", 16)
        b = encode_text("bear be in forest", 16)
        assert np.array_equal(a.values, b.values)
        assert abs(np.linalg.norm(a.values) - 1.0) < 1e-12

    def test_golden_vector(self):
        # frozen from the independent oracle above
        golden = np.zeros(16)
        golden[0] = 0.8164965809277261
        golden[3] = 0.4082482904638631
        golden[14] = 0.4082482904638631
        got = encode_text("bear be in forest", 16)
        assert np.array_equal(got.values, golden)
        assert np.array_equal(got.values, embedding_oracle("bear be in forest", 16))

    def test_matches_oracle_on_varied_prompts(self):
        prompts = [
            "wolf be in forest, tiger be in field, trees be behind train",
            "dog sitting on bench",
            "Numbers 123 and under_scores split!",
            "  punctuation,,, only???  ",
        ]
        for p in prompts:
            assert np.array_equal(encode_text(p, 16).values, embedding_oracle(p, 16))

    def test_bag_of_words_reordering_invariance(self):
        a = encode_text("bear be in forest", 16)
        b = encode_text("forest in be bear", 16)
        assert np.array_equal(a.values, b.values)

    def test_case_folding(self):
        assert np.array_equal(encode_text("Bear BE In FOREST", 16).values, encode_text("bear be in forest", 16).values)

    def test_null_word_differs_from_null_conditioning(self):
        assert not encode_text("null", 16).is_null

    def test_punctuation_only_is_null(self):
        assert encode_text("?!, --", 16).is_null

    def test_dimension_validation(self):
        with pytest.raises(ValidationError):
            encode_text("x", 0)

    def test_small_dimension(self):
        emb = encode_text("one two three", 1)
        assert emb.dimension == 1

    @settings(max_examples=100, deadline=None)
    @given(st.text(max_size=40), st.integers(min_value=1, max_value=24))
    def test_norm_invariant_property(self, text, d):
        emb = encode_text(text, d)
        norm = np.linalg.norm(emb.values)
        assert norm == 0.0 or abs(norm - 1.0) < 1e-9


class TestTextEmbedding:
    def test_rejects_nonfinite(self):
        with pytest.raises(ValidationError):
            TextEmbedding(values=np.array([np.inf, 0.0]))

    def test_rejects_unnormalized(self):
        with pytest.raises(ValidationError):
            TextEmbedding(values=np.array([0.5, 0.5]))

    def test_values_are_frozen(self):
        emb = encode_text("bear", 4)
        with pytest.raises(ValueError):
            emb.values[0] = 7.0
