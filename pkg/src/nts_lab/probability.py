"""Finite-alphabet probability primitives.

Distributions, entropy and divergence in bits, empirical types of words,
and type-class combinatorics.  All objects are immutable after construction
and all functions are pure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import gammaln

_SUM_TOL = 1e-12
_LN2 = math.log(2.0)


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Distribution:
    """A probability vector on a finite alphabet."""

    probs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        if p.ndim != 1 or p.size < 1:
            raise ValueError("probs must be a nonempty 1-D vector")
        if not np.all(np.isfinite(p)):
            raise ValueError("probs contains a NaN or infinite entry")
        if np.any(p < 0):
            raise ValueError("probs contains a negative entry")
        s = float(p.sum())
        if abs(s - 1.0) > _SUM_TOL:
            raise ValueError(f"probs sum to {s!r}, expected 1 within {_SUM_TOL}")
        object.__setattr__(self, "probs", _frozen(p))

    @property
    def alphabet_size(self) -> int:
        return self.probs.size

    def support(self, threshold: float = 0.0) -> np.ndarray:
        return np.flatnonzero(self.probs > threshold)


def make_distribution(weights) -> Distribution:
    """Normalize a vector of nonnegative weights into a Distribution."""
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1 or w.size < 1:
        raise ValueError("weights must be a nonempty 1-D vector")
    if not np.all(np.isfinite(w)):
        raise ValueError("weights contains a NaN or infinite entry")
    if np.any(w < 0):
        raise ValueError("weights contains a negative entry")
    s = w.sum()
    if s <= 0:
        raise ValueError("weights are all zero; cannot normalize")
    p = w / s
    # guard against round-off drift in the normalized sum
    p = p / p.sum()
    return Distribution(p)


def uniform_distribution(alphabet_size: int) -> Distribution:
    if alphabet_size < 1:
        raise ValueError("alphabet_size must be >= 1")
    return Distribution(np.full(alphabet_size, 1.0 / alphabet_size))


def point_mass(alphabet_size: int, letter: int) -> Distribution:
    if not 0 <= letter < alphabet_size:
        raise ValueError("letter out of range")
    p = np.zeros(alphabet_size)
    p[letter] = 1.0
    return Distribution(p)


def entropy(p: Distribution) -> float:
    """Shannon entropy in bits, with the 0*log(0) = 0 convention."""
    q = p.probs[p.probs > 0]
    return float(-(q * np.log2(q)).sum())


def binary_entropy(x: float) -> float:
    """h(x) = -x log2 x - (1-x) log2 (1-x), used as a closed-form oracle."""
    if x < 0 or x > 1:
        raise ValueError("argument outside [0, 1]")
    if x == 0 or x == 1:
        return 0.0
    return float(-x * math.log2(x) - (1 - x) * math.log2(1 - x))


def kl_divergence(p: Distribution, q: Distribution) -> float:
    """KL divergence D(p || q) in bits.

    Returns math.inf when support(p) is not contained in support(q);
    never returns NaN.
    """
    if p.alphabet_size != q.alphabet_size:
        raise ValueError("alphabet sizes differ")
    pa, qa = p.probs, q.probs
    mask = pa > 0
    if np.any(qa[mask] == 0):
        return math.inf
    return float((pa[mask] * np.log2(pa[mask] / qa[mask])).sum())


@dataclass(frozen=True, eq=False)
class TypeDistribution:
    """The empirical histogram of a length-L word over a finite alphabet."""

    counts: np.ndarray
    length: int

    def __post_init__(self):
        c = np.asarray(self.counts)
        if c.ndim != 1 or c.size < 1:
            raise ValueError("counts must be a nonempty 1-D vector")
        if np.any(c < 0) or not np.issubdtype(c.dtype, np.integer):
            raise ValueError("counts must be nonnegative integers")
        if self.length < 1:
            raise ValueError("length must be >= 1")
        if int(c.sum()) != self.length:
            raise ValueError("counts must sum to length")
        object.__setattr__(self, "counts", _frozen(c.astype(np.int64)))

    @property
    def alphabet_size(self) -> int:
        return self.counts.size

    def as_distribution(self) -> Distribution:
        return Distribution(self.counts / self.length)


def empirical_type(word, alphabet_size: int) -> TypeDistribution:
    """Count letter occurrences of a word into a TypeDistribution."""
    w = np.asarray(word)
    if w.ndim != 1 or w.size < 1:
        raise ValueError("word must be a nonempty 1-D sequence")
    if np.any(w < 0) or np.any(w >= alphabet_size):
        raise ValueError("word contains a letter outside the alphabet")
    counts = np.bincount(w.astype(np.int64), minlength=alphabet_size)
    return TypeDistribution(counts=counts, length=int(w.size))


def log_type_class_size(t: TypeDistribution) -> float:
    """log2 of the multinomial coefficient L! / prod(counts!)."""
    c = t.counts
    return float((gammaln(t.length + 1) - gammaln(c + 1).sum()) / _LN2)


def num_types(length: int, alphabet_size: int) -> int:
    """Number of distinct types of denominator `length` (stars and bars)."""
    return math.comb(length + alphabet_size - 1, alphabet_size - 1)


@lru_cache(maxsize=None)
def _enumerate_types_cached(length: int, alphabet_size: int) -> np.ndarray:
    def compositions(total, parts):
        if parts == 1:
            yield (total,)
            return
        for first in range(total + 1):
            for rest in compositions(total - first, parts - 1):
                yield (first,) + rest

    rows = sorted(compositions(length, alphabet_size), key=lambda c: c[::-1])
    return _frozen(np.array(rows, dtype=np.int64))


def enumerate_types(length: int, alphabet_size: int, guard: int = 10**6) -> np.ndarray:
    """All count vectors of denominator `length`, in colexicographic order.

    Returns an (n_types, alphabet_size) integer array.  Refuses to enumerate
    more than `guard` types; callers beyond that should fall back to sampling.
    """
    if length < 1 or alphabet_size < 1:
        raise ValueError("length and alphabet_size must be >= 1")
    n = num_types(length, alphabet_size)
    if n > guard:
        raise ValueError(
            f"{n} types exceed the enumeration guard of {guard}; "
            "use sampling estimates instead"
        )
    return _enumerate_types_cached(length, alphabet_size)
