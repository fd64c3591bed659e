"""Token-based image generation: palette codec, next-token model, sampling.

Images are grids of discrete tokens.  A token decodes to a solid
patch_size x patch_size patch of its palette color; encoding quantizes
each patch's mean color back to the nearest palette entry, so
encode(decode(z)) == z for every valid token grid.

The next-token model is deliberately tiny and hand-differentiable:

    hidden = start_embed + e_t @ cond_proj + mean(token_embed[prefix])
    logits = tanh(hidden) @ out_proj

with the empty-prefix mean defined as 0.  Sequences factorize into
per-step conditionals; the sequence NLL is the sum of per-step negative
log softmax probabilities, and training runs plain gradient descent on
analytically derived gradients.
"""

from __future__ import annotations

import colorsys
import json
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .rng import SplitMix64
from .text_encoding import encode_text

DEFAULT_CODEBOOK_SIZE = 32
DEFAULT_PATCH_SIZE = 1
DEFAULT_GRID = (4, 4)
DEFAULT_MODEL_WIDTH = 32

# seeded-init scales tuned so that a 500-step / lr 0.05 run overfits a
# single 16-token sequence to well under 0.1 nats per token
INIT_SCALES = {"token_embed": 2.0, "cond_proj": 0.3, "out_proj": 0.5, "start_embed": 0.3}


@dataclass(frozen=True, eq=False)
class Codebook:
    """K palette colors in [0,1]^3; each token paints one p x p patch."""

    palette: np.ndarray
    patch_size: int = DEFAULT_PATCH_SIZE

    def __eq__(self, other):
        return (
            isinstance(other, Codebook)
            and self.patch_size == other.patch_size
            and np.array_equal(self.palette, other.palette)
        )

    def __post_init__(self):
        pal = np.array(self.palette, dtype=np.float64)
        if pal.ndim != 2 or pal.shape[1] != 3 or pal.shape[0] < 2:
            raise ValidationError("palette must be a (K, 3) array with K >= 2")
        if np.any(pal < 0) or np.any(pal > 1) or not np.all(np.isfinite(pal)):
            raise ValidationError("palette colors must lie in [0, 1]^3")
        if len({tuple(row) for row in pal.tolist()}) != pal.shape[0]:
            raise ValidationError("palette entries must be distinct")
        if self.patch_size < 1:
            raise ValidationError("patch_size must be >= 1")
        pal.setflags(write=False)
        object.__setattr__(self, "palette", pal)

    @property
    def size(self) -> int:
        return int(self.palette.shape[0])


def default_codebook(size: int = DEFAULT_CODEBOOK_SIZE, patch_size: int = DEFAULT_PATCH_SIZE) -> Codebook:
    """Fixed palette of evenly spaced hues around the color ring."""
    palette = [colorsys.hsv_to_rgb(i / size, 1.0, 1.0) for i in range(size)]
    return Codebook(palette=np.array(palette), patch_size=patch_size)


@dataclass(frozen=True)
class TokenSequence:
    """Token ids laid out row-major on a rows x cols grid."""

    tokens: tuple[int, ...]
    grid: tuple[int, int]

    def __post_init__(self):
        rows, cols = self.grid
        object.__setattr__(self, "tokens", tuple(int(t) for t in self.tokens))
        object.__setattr__(self, "grid", (int(rows), int(cols)))
        if rows < 1 or cols < 1 or rows * cols != len(self.tokens):
            raise ValidationError(f"grid {self.grid} does not match {len(self.tokens)} tokens")
        if any(t < 0 for t in self.tokens):
            raise ValidationError("token ids must be non-negative")


@dataclass(frozen=True, eq=False)
class ImageGrid:
    """Pixel array of shape (H, W, 3) with channels in [0, 1]."""

    pixels: np.ndarray

    def __eq__(self, other):
        return isinstance(other, ImageGrid) and np.array_equal(self.pixels, other.pixels)

    def __post_init__(self):
        px = np.array(self.pixels, dtype=np.float64)
        if px.ndim != 3 or px.shape[2] != 3:
            raise ValidationError("pixels must have shape (H, W, 3)")
        if np.any(px < 0) or np.any(px > 1) or not np.all(np.isfinite(px)):
            raise ValidationError("pixel channels must lie in [0, 1]")
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)


@dataclass(frozen=True, eq=False)
class ARModelParams:
    """Next-token model parameters.

    token_embed: (K, d_m), cond_proj: (d, d_m), out_proj: (d_m, K),
    start_embed: (d_m,).
    """

    token_embed: np.ndarray
    cond_proj: np.ndarray
    out_proj: np.ndarray
    start_embed: np.ndarray

    def __eq__(self, other):
        return isinstance(other, ARModelParams) and all(
            np.array_equal(getattr(self, f), getattr(other, f))
            for f in ("token_embed", "cond_proj", "out_proj", "start_embed")
        )

    def __post_init__(self):
        te = np.array(self.token_embed, dtype=np.float64)
        cp = np.array(self.cond_proj, dtype=np.float64)
        op = np.array(self.out_proj, dtype=np.float64)
        se = np.array(self.start_embed, dtype=np.float64)
        k, d_m = te.shape
        if cp.ndim != 2 or cp.shape[1] != d_m or op.shape != (d_m, k) or se.shape != (d_m,):
            raise ValidationError("inconsistent parameter shapes")
        for name, arr in (("token_embed", te), ("cond_proj", cp), ("out_proj", op), ("start_embed", se)):
            if not np.all(np.isfinite(arr)):
                raise ValidationError(f"{name} contains non-finite entries")
            arr.setflags(write=False)
        object.__setattr__(self, "token_embed", te)
        object.__setattr__(self, "cond_proj", cp)
        object.__setattr__(self, "out_proj", op)
        object.__setattr__(self, "start_embed", se)

    @property
    def vocab_size(self) -> int:
        return int(self.token_embed.shape[0])

    @property
    def width(self) -> int:
        return int(self.token_embed.shape[1])

    @property
    def embed_dim(self) -> int:
        return int(self.cond_proj.shape[0])


def init_ar_params(
    vocab_size: int = DEFAULT_CODEBOOK_SIZE,
    embed_dim: int = 16,
    width: int = DEFAULT_MODEL_WIDTH,
    seed: int = 0,
) -> ARModelParams:
    """Seeded gaussian initialization with the tuned per-matrix scales."""
    rng = SplitMix64(seed)
    te = rng.normals(vocab_size * width).reshape(vocab_size, width) * INIT_SCALES["token_embed"]
    cp = rng.normals(embed_dim * width).reshape(embed_dim, width) * INIT_SCALES["cond_proj"]
    op = rng.normals(width * vocab_size).reshape(width, vocab_size) * INIT_SCALES["out_proj"]
    se = rng.normals(width) * INIT_SCALES["start_embed"]
    return ARModelParams(token_embed=te, cond_proj=cp, out_proj=op, start_embed=se)


# ---------------------------------------------------------------------------
# codec


def decode_tokens(z: TokenSequence, cb: Codebook) -> ImageGrid:
    """Paint each token's palette color over its patch."""
    rows, cols = z.grid
    if any(t >= cb.size for t in z.tokens):
        raise ValidationError(f"token id out of range for codebook of size {cb.size}")
    p = cb.patch_size
    grid = np.asarray(z.tokens, dtype=np.int64).reshape(rows, cols)
    pixels = cb.palette[grid]  # (rows, cols, 3)
    pixels = np.repeat(np.repeat(pixels, p, axis=0), p, axis=1)
    return ImageGrid(pixels=pixels)


def encode_image(img: ImageGrid, cb: Codebook) -> TokenSequence:
    """Quantize each patch's mean color to the nearest palette index.

    Distance ties break to the lowest index.
    """
    p = cb.patch_size
    h, w, _ = img.pixels.shape
    if h % p or w % p:
        raise ValidationError(f"image {h}x{w} is not divisible by patch size {p}")
    rows, cols = h // p, w // p
    means = img.pixels.reshape(rows, p, cols, p, 3).mean(axis=(1, 3))
    flat = means.reshape(-1, 3)
    d2 = ((flat[:, None, :] - cb.palette[None, :, :]) ** 2).sum(axis=2)
    tokens = np.argmin(d2, axis=1)  # argmin returns the first minimum
    return TokenSequence(tokens=tuple(int(t) for t in tokens), grid=(rows, cols))


# ---------------------------------------------------------------------------
# next-token model


def _prefix_means(params: ARModelParams, tokens: tuple[int, ...]) -> np.ndarray:
    """Row l holds the mean of token_embed over tokens[:l] (row 0 is zero)."""
    length = len(tokens)
    means = np.zeros((length, params.width))
    if length > 1:
        csum = np.cumsum(params.token_embed[np.asarray(tokens[:-1], dtype=np.int64)], axis=0)
        means[1:] = csum / np.arange(1, length)[:, None]
    return means


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    mx = logits.max(axis=-1, keepdims=True)
    return logits - mx - np.log(np.exp(logits - mx).sum(axis=-1, keepdims=True))


def ar_next_logits(prefix: list[int], e_t, params: ARModelParams) -> np.ndarray:
    """Logits over the next token given a prefix and conditioning vector."""
    if any(t < 0 or t >= params.vocab_size for t in prefix):
        raise ValidationError("prefix token out of range")
    if len(prefix) > 0:
        mean = params.token_embed[np.asarray(prefix, dtype=np.int64)].mean(axis=0)
    else:
        mean = np.zeros(params.width)
    hidden = params.start_embed + e_t.values @ params.cond_proj + mean
    return np.tanh(hidden) @ params.out_proj


def sample_tokens(
    e_t,
    params: ARModelParams,
    length: int,
    grid: tuple[int, int],
    temperature: float = 1.0,
    seed: int = 0,
) -> TokenSequence:
    """Sample a token sequence left to right.

    temperature 0 decodes greedily (argmax, lowest index on ties);
    otherwise each step draws from softmax(logits / temperature) by
    inverse CDF over the seeded SplitMix64 stream, so results are
    bit-reproducible for a fixed seed.
    """
    rows, cols = grid
    if rows * cols != length:
        raise ValidationError(f"grid {grid} does not match length {length}")
    if temperature < 0:
        raise ValidationError("temperature must be non-negative")
    rng = SplitMix64(seed)
    tokens: list[int] = []
    for _ in range(length):
        logits = ar_next_logits(tokens, e_t, params)
        if temperature == 0:
            tokens.append(int(np.argmax(logits)))
            continue
        probs = np.exp(_log_softmax(logits / temperature))
        cdf = np.cumsum(probs)
        k = int(np.searchsorted(cdf, rng.random(), side="right"))
        tokens.append(min(k, params.vocab_size - 1))
    return TokenSequence(tokens=tuple(tokens), grid=grid)


def _sequence_forward(params: ARModelParams, e_t, tokens: tuple[int, ...]):
    z = np.asarray(tokens, dtype=np.int64)
    hidden = params.start_embed + e_t.values @ params.cond_proj + _prefix_means(params, tokens)
    activ = np.tanh(hidden)
    logp = _log_softmax(activ @ params.out_proj)
    nll = -float(logp[np.arange(len(tokens)), z].sum())
    return nll, activ, logp, z


def token_nll(z: TokenSequence, e_t, params: ARModelParams) -> float:
    """Sequence negative log-likelihood in nats (log-sum-exp stabilized)."""
    if any(t >= params.vocab_size for t in z.tokens):
        raise ValidationError("token id out of range for this model")
    return _sequence_forward(params, e_t, z.tokens)[0]


def train_step(
    batch: list[tuple[str, TokenSequence]],
    params: ARModelParams,
    lr: float,
) -> tuple[ARModelParams, float]:
    """One gradient-descent step on the batch-mean sequence NLL.

    Captions are encoded with the deterministic text encoder at the
    model's conditioning width.  Returns the updated parameters and the
    pre-step loss.
    """
    if not batch:
        raise ValidationError("training batch must be non-empty")
    if lr < 0:
        raise ValidationError("learning rate must be non-negative")
    d_te = np.zeros_like(params.token_embed)
    d_cp = np.zeros_like(params.cond_proj)
    d_op = np.zeros_like(params.out_proj)
    d_se = np.zeros_like(params.start_embed)
    total = 0.0
    for caption, seq in batch:
        e_t = encode_text(caption, params.embed_dim)
        nll, activ, logp, z = _sequence_forward(params, e_t, seq.tokens)
        total += nll
        length = len(seq.tokens)
        d_logits = np.exp(logp)
        d_logits[np.arange(length), z] -= 1.0
        d_op += activ.T @ d_logits
        d_hidden = (1.0 - activ * activ) * (d_logits @ params.out_proj.T)
        col = d_hidden.sum(axis=0)
        d_se += col
        d_cp += np.outer(e_t.values, col)
        # position l's hidden mean distributes d_hidden[l]/l to each prefix token
        if length > 1:
            weighted = d_hidden[1:] / np.arange(1, length)[:, None]
            suffix = np.cumsum(weighted[::-1], axis=0)[::-1]
            np.add.at(d_te, z[:-1], suffix)
    n = len(batch)
    updated = ARModelParams(
        token_embed=params.token_embed - lr * d_te / n,
        cond_proj=params.cond_proj - lr * d_cp / n,
        out_proj=params.out_proj - lr * d_op / n,
        start_embed=params.start_embed - lr * d_se / n,
    )
    return updated, total / n


# ---------------------------------------------------------------------------
# serialization


def params_to_json(params: ARModelParams) -> str:
    doc = {
        "token_embed": params.token_embed.tolist(),
        "cond_proj": params.cond_proj.tolist(),
        "out_proj": params.out_proj.tolist(),
        "start_embed": params.start_embed.tolist(),
    }
    return json.dumps(doc)


def params_from_json(text: str) -> ARModelParams:
    doc = json.loads(text)
    try:
        return ARModelParams(
            token_embed=np.array(doc["token_embed"], dtype=np.float64),
            cond_proj=np.array(doc["cond_proj"], dtype=np.float64),
            out_proj=np.array(doc["out_proj"], dtype=np.float64),
            start_embed=np.array(doc["start_embed"], dtype=np.float64),
        )
    except (KeyError, TypeError, ValueError) as e:
        raise ValidationError(f"invalid model parameter file: {e}") from e


def tokens_to_json(z: TokenSequence) -> str:
    return json.dumps({"tokens": list(z.tokens), "grid": list(z.grid)})


def tokens_from_json(text: str) -> TokenSequence:
    doc = json.loads(text)
    try:
        return TokenSequence(tokens=tuple(doc["tokens"]), grid=tuple(doc["grid"]))
    except (KeyError, TypeError) as e:
        raise ValidationError(f"invalid token sequence file: {e}") from e
