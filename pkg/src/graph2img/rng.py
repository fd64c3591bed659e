"""Seedable deterministic random numbers (SplitMix64 + Box-Muller).

The generator is fully specified by integer arithmetic mod 2**64, so
streams are bit-identical across platforms and runs.  The k-th output of
a SplitMix64 stream has the closed form mix(seed + (k+1)*GAMMA), which
lets the vectorized helpers produce exactly the same values as the
scalar ones while advancing the shared state.
"""

from __future__ import annotations

import math

import numpy as np

_MASK = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_TWO53 = float(1 << 53)


def _mix(z: int) -> int:
    z &= _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def _mix_array(z: np.ndarray) -> np.ndarray:
    # numpy uint64 arithmetic wraps mod 2**64, matching _mix exactly
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


class SplitMix64:
    """Deterministic 64-bit generator with uniform and gaussian output."""

    def __init__(self, seed: int):
        self._state = seed & _MASK

    def u64(self) -> int:
        self._state = (self._state + _GAMMA) & _MASK
        return _mix(self._state)

    def random(self) -> float:
        """Uniform float in [0, 1) with 53 bits of precision."""
        return (self.u64() >> 11) / _TWO53

    def _u64_block(self, n: int) -> np.ndarray:
        ks = np.uint64(self._state) + np.arange(1, n + 1, dtype=np.uint64) * np.uint64(_GAMMA)
        self._state = (self._state + n * _GAMMA) & _MASK
        return _mix_array(ks)

    def uniforms(self, n: int) -> np.ndarray:
        """n uniform floats in [0, 1), identical to n calls of random()."""
        return (self._u64_block(n) >> np.uint64(11)).astype(np.float64) / _TWO53

    def normals(self, n: int) -> np.ndarray:
        """n standard gaussians via Box-Muller over consecutive uniforms.

        The first uniform of each pair is shifted to (0, 1] so the log is
        always finite.
        """
        pairs = (n + 1) // 2
        u = (self._u64_block(2 * pairs) >> np.uint64(11)).astype(np.float64)
        u1 = (u[0::2] + 1.0) / _TWO53
        u2 = u[1::2] / _TWO53
        r = np.sqrt(-2.0 * np.log(u1))
        out = np.empty(2 * pairs)
        out[0::2] = r * np.cos(2.0 * math.pi * u2)
        out[1::2] = r * np.sin(2.0 * math.pi * u2)
        return out[:n]
