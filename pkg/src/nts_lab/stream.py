"""Deterministic counter-based random streams.

Every uniform draw is a pure function of a 64-bit key and a counter
(domain, generation, index, position), so encoder and decoder can
regenerate any codeword independently and in any order.  The primitive is
a chained SplitMix64 finalizer; it is a frozen implementation choice:
changing it changes every trace, so it must never be altered once traces
have been published.
"""

from __future__ import annotations

import numpy as np

_PHI = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_MASK = (1 << 64) - 1
_INV_2_53 = float(2.0**-53)


def _mix(z: np.ndarray) -> np.ndarray:
    """SplitMix64 finalizer (bijective on uint64)."""
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def _u64(value: int) -> np.uint64:
    return np.uint64(int(value) & _MASK)


def stream_key(seed: int, domain: int) -> np.uint64:
    """Derive the 64-bit stream key for (seed, domain)."""
    with np.errstate(over="ignore"):
        return _mix(_mix(_u64(seed) * _PHI) + _u64(domain) * _PHI)


def uniform_grid(
    seed: int, domain: int, generation: int, indices, n_positions: int
) -> np.ndarray:
    """Uniform [0,1) draws for a grid of counters.

    Returns shape (len(indices), n_positions); entry (b, p) depends only on
    (seed, domain, generation, indices[b], p).
    """
    idx = np.asarray(indices, dtype=np.uint64)
    pos = np.arange(n_positions, dtype=np.uint64)
    with np.errstate(over="ignore"):
        h = _mix(stream_key(seed, domain) + _u64(generation) * _PHI)
        h = _mix(h + idx * _PHI)
        h = _mix(h[:, None] + pos[None, :] * _PHI)
    return (h >> np.uint64(11)).astype(np.float64) * _INV_2_53


def uniform_block(
    seed: int, domain: int, generation: int, index: int, n_positions: int,
    start: int = 0,
) -> np.ndarray:
    """Uniform [0,1) draws at positions start .. start+n_positions-1."""
    pos = np.arange(start, start + n_positions, dtype=np.uint64)
    with np.errstate(over="ignore"):
        h = _mix(stream_key(seed, domain) + _u64(generation) * _PHI)
        h = _mix(h + _u64(index) * _PHI)
        h = _mix(h + pos * _PHI)
    return (h >> np.uint64(11)).astype(np.float64) * _INV_2_53


class SubStream:
    """Sequential view of one (seed, domain, generation, index) substream."""

    def __init__(self, seed: int, domain: int, generation: int, index: int):
        self.seed = int(seed)
        self.domain = int(domain)
        self.generation = int(generation)
        self.index = int(index)
        self.position = 0

    def next(self, n: int) -> np.ndarray:
        u = uniform_block(
            self.seed, self.domain, self.generation, self.index, n,
            start=self.position,
        )
        self.position += n
        return u
