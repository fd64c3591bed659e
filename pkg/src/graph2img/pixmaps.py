"""Plain-text pixmap serialization: P3 PPM for images, P2 PGM for latents.

PPM channels are emitted as round(255 * value).  PGM maps latent values
linearly between [-1, 1] and [0, 255]; values outside [-1, 1] clamp.
"""

from __future__ import annotations

import numpy as np

from .errors import ValidationError
from .vargen import ImageGrid


def image_to_ppm(img: ImageGrid) -> str:
    h, w, _ = img.pixels.shape
    levels = np.rint(img.pixels * 255.0).astype(np.int64)
    lines = [f"P3", f"{w} {h}", "255"]
    for row in levels:
        lines.append(" ".join(str(v) for v in row.reshape(-1)))
    return "\n".join(lines) + "\n"


def latent_to_pgm(values: np.ndarray, shape: tuple[int, int]) -> str:
    rows, cols = shape
    flat = np.asarray(values, dtype=np.float64).reshape(-1)
    if rows * cols != flat.size:
        raise ValidationError(f"shape {shape} does not match latent of length {flat.size}")
    levels = np.rint(np.clip((flat + 1.0) / 2.0, 0.0, 1.0) * 255.0).astype(np.int64)
    lines = ["P2", f"{cols} {rows}", "255"]
    for r in range(rows):
        lines.append(" ".join(str(v) for v in levels[r * cols : (r + 1) * cols]))
    return "\n".join(lines) + "\n"


def latent_from_pgm(text: str) -> tuple[np.ndarray, tuple[int, int]]:
    """Parse a P2 PGM into ([-1, 1] latent values, (rows, cols))."""
    tokens = []
    for line in text.splitlines():
        body = line.split("#", 1)[0]
        tokens.extend(body.split())
    if not tokens or tokens[0] != "P2":
        raise ValidationError("latent pixmaps must be plain PGM (P2)")
    try:
        cols, rows, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
        levels = [int(v) for v in tokens[4:]]
    except (IndexError, ValueError) as e:
        raise ValidationError(f"malformed PGM: {e}") from e
    if maxval < 1 or cols < 1 or rows < 1:
        raise ValidationError("malformed PGM header")
    if len(levels) != rows * cols:
        raise ValidationError(f"PGM declares {rows * cols} samples but carries {len(levels)}")
    if any(v < 0 or v > maxval for v in levels):
        raise ValidationError("PGM sample outside [0, maxval]")
    values = np.asarray(levels, dtype=np.float64) / maxval * 2.0 - 1.0
    return values, (rows, cols)
