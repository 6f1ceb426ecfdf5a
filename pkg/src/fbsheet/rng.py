"""Counter-based normal deviates keyed by ``(master_seed, stream_id, channel)``.

Every stream is an independent Philox-4x64 key, so a replica's numbers do not
depend on which worker draws it or in what order.  Draw ``k`` of a stream is
always the ``k``-th 64-bit output of its key, turned into a uniform on (0, 1)
and mapped through the inverse normal CDF.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

_CHANNEL_BITS = 16
_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class SeedSpec:
    master_seed: int
    stream_id: int = 0

    def __post_init__(self):
        if not 0 <= self.master_seed <= _MASK64:
            raise ValueError("master_seed must be an unsigned 64-bit integer")
        if self.stream_id < 0 or self.stream_id >= 1 << (64 - _CHANNEL_BITS):
            raise ValueError("stream_id out of range")

    def replica(self, index: int) -> "SeedSpec":
        """Seed for replica ``index`` counted from this stream."""
        return SeedSpec(self.master_seed, self.stream_id + index)


def _bit_generator(seed: SeedSpec, channel: int) -> np.random.Philox:
    if not 0 <= channel < 1 << _CHANNEL_BITS:
        raise ValueError("channel out of range")
    key = np.array([seed.master_seed, (seed.stream_id << _CHANNEL_BITS) | channel], dtype=np.uint64)
    return np.random.Philox(key=key)


def uniforms(seed: SeedSpec, size: int, channel: int = 0, start: int = 0) -> np.ndarray:
    """``size`` uniforms in the open interval (0, 1) starting at draw ``start``."""
    bg = _bit_generator(seed, channel)
    # Philox emits blocks of four 64-bit words per counter step
    block, offset = divmod(start, 4)
    if block:
        bg.advance(block)
    raw = bg.random_raw(size + offset)[offset:]
    return ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * (1.0 / (1 << 53))


def normals(seed: SeedSpec, size: int, channel: int = 0, start: int = 0) -> np.ndarray:
    """Standard normal deviates by inversion of the CDF."""
    return ndtri(uniforms(seed, size, channel, start))
