"""Deterministic random number generation.

All stochastic pieces of the toolkit (weight init, dropout masks, dataset
shuffles) draw from SplitMix64 so that a 64-bit seed fully determines every
artifact, independent of numpy's own generator versioning.
"""

from __future__ import annotations

import numpy as np

_MASK64 = 0xFFFFFFFFFFFFFFFF
_GAMMA = 0x9E3779B97F4B7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


def _mix(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
    return z ^ (z >> np.uint64(31))


class SeededRng:
    """SplitMix64 stream: same seed, same stream, forever."""

    def __init__(self, seed: int):
        self._state = seed & _MASK64

    def next_u64(self, n: int) -> np.ndarray:
        """Next n raw 64-bit outputs as a uint64 array."""
        steps = np.arange(1, n + 1, dtype=np.uint64)
        with np.errstate(over="ignore"):
            z = _mix(np.uint64(self._state) + steps * np.uint64(_GAMMA))
        self._state = (self._state + n * _GAMMA) & _MASK64
        return z

    def uniform(self, n: int) -> np.ndarray:
        """n doubles uniform in [0, 1), 53-bit resolution."""
        return (self.next_u64(n) >> np.uint64(11)).astype(np.float64) * (2.0**-53)

    def normal(self, n: int) -> np.ndarray:
        """n standard-normal doubles via Box-Muller."""
        m = (n + 1) // 2
        u1 = self.uniform(m)
        u2 = self.uniform(m)
        r = np.sqrt(-2.0 * np.log(1.0 - u1))  # 1-u1 keeps log away from 0
        theta = 2.0 * np.pi * u2
        out = np.concatenate([r * np.cos(theta), r * np.sin(theta)])
        return out[:n]

    def integer(self, bound: int) -> int:
        """One integer in [0, bound). Modulo bias is negligible for bound << 2^64."""
        return int(self.next_u64(1)[0] % np.uint64(bound))

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates shuffle."""
        for i in range(len(items) - 1, 0, -1):
            j = self.integer(i + 1)
            items[i], items[j] = items[j], items[i]

    def split(self) -> "SeededRng":
        """Child generator seeded from this stream; decorrelates substreams."""
        return SeededRng(int(self.next_u64(1)[0]))
