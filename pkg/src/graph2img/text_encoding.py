"""Deterministic text-to-vector encoder (signed bag-of-words hashing).

This stands in for a pretrained text encoder wherever the pipeline needs
conditioning vectors.  It is not semantic: it only guarantees that equal
token multisets map to equal vectors, that distinct prompts in the test
corpus separate, and that the result is bit-identical across platforms.

Encoding rule: lowercase the text, split on runs of non-alphanumeric
characters, hash each token with 64-bit FNV-1a, and add +/-1 (sign from
the hash's top bit) into accumulator slot ``hash mod d``.  A non-zero
accumulator is L2-normalized; an empty accumulator is the zero vector,
which is the null conditioning.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

FNV64_OFFSET = 0xCBF29CE484222325
FNV64_PRIME = 0x100000001B3
_MASK = (1 << 64) - 1

DEFAULT_EMBED_DIM = 16


@dataclass(frozen=True, eq=False)
class TextEmbedding:
    """A conditioning vector: either exactly zero or unit Euclidean norm."""

    values: np.ndarray

    def __post_init__(self):
        arr = np.array(self.values, dtype=np.float64)
        if arr.ndim != 1 or arr.size < 1:
            raise ValidationError("embedding must be a non-empty 1-D vector")
        if not np.all(np.isfinite(arr)):
            raise ValidationError("embedding entries must be finite")
        norm = float(np.linalg.norm(arr))
        if norm != 0.0 and abs(norm - 1.0) > 1e-9:
            raise ValidationError(f"embedding must be the zero vector or unit norm, got norm {norm!r}")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    def __eq__(self, other):
        return isinstance(other, TextEmbedding) and np.array_equal(self.values, other.values)

    @property
    def dimension(self) -> int:
        return self.values.size

    @property
    def is_null(self) -> bool:
        return not np.any(self.values)


def fnv1a64(data: bytes) -> int:
    """64-bit FNV-1a hash of a byte string."""
    h = FNV64_OFFSET
    for b in data:
        h ^= b
        h = (h * FNV64_PRIME) & _MASK
    return h


def _tokenize(text: str) -> list[str]:
    return "".join(ch if ch.isalnum() else " " for ch in text.lower()).split()


def encode_text(text: str, d: int = DEFAULT_EMBED_DIM) -> TextEmbedding:
    """Encode text into a d-dimensional conditioning vector.

    Deterministic across runs and platforms; the empty string (or text
    with no alphanumeric characters) yields the zero vector.
    """
    if d < 1:
        raise ValidationError(f"embedding dimension must be >= 1, got {d}")
    acc = np.zeros(d)
    for token in _tokenize(text):
        h = fnv1a64(token.encode("utf-8"))
        sign = 1.0 if (h >> 63) == 0 else -1.0
        acc[h % d] += sign
    norm = math.sqrt(float(acc @ acc))
    if norm > 0.0:
        acc /= norm
    return TextEmbedding(values=acc)


def null_embedding(d: int = DEFAULT_EMBED_DIM) -> TextEmbedding:
    """The zero vector used as the unconditioned branch."""
    return encode_text("", d)
