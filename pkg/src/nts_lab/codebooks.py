"""Codeword sampling laws for random codebooks.

Three families:
  * IIDCodebook          - letters drawn i.i.d. from a base distribution;
  * UniformTypeCodebook  - a type class drawn uniformly, then a uniform word
                           of that type;
  * TypeMixtureCodebook  - a type class drawn with weight 2^{-kappa * KL(type
                           || center)}, then a uniform word of that type.

The mixture concentration kappa interpolates the two extremes: kappa -> 0
recovers the uniform-over-type-classes law, kappa -> infinity concentrates
on the types closest to the center.  Annealing schedules raise kappa over
generations to narrow exploration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .probability import (
    Distribution,
    TypeDistribution,
    enumerate_types,
    kl_divergence,
    log_type_class_size,
    num_types,
)
from .stream import SubStream, uniform_grid


@dataclass(frozen=True, eq=False)
class IIDCodebook:
    base: Distribution
    word_length: int

    def __post_init__(self):
        if self.word_length < 1:
            raise ValueError("word_length must be >= 1")

    @property
    def alphabet_size(self) -> int:
        return self.base.alphabet_size


@dataclass(frozen=True, eq=False)
class UniformTypeCodebook:
    alphabet_size: int
    word_length: int

    def __post_init__(self):
        if self.alphabet_size < 1 or self.word_length < 1:
            raise ValueError("alphabet_size and word_length must be >= 1")


@dataclass(frozen=True, eq=False)
class TypeMixtureCodebook:
    center: Distribution
    concentration: float
    word_length: int

    def __post_init__(self):
        if self.concentration <= 0:
            raise ValueError("concentration must be > 0")
        if self.word_length < 1:
            raise ValueError("word_length must be >= 1")

    @property
    def alphabet_size(self) -> int:
        return self.center.alphabet_size


CodebookModel = IIDCodebook | UniformTypeCodebook | TypeMixtureCodebook


@dataclass(frozen=True)
class AnnealSchedule:
    """Concentration kappa as a non-decreasing function of the generation.

    kinds: "constant" (kappa = base), "linear" (base + rate * n),
    "geometric" (base * rate**n with rate >= 1).
    """

    kind: str = "constant"
    base: float = 1.0
    rate: float = 0.0

    def __post_init__(self):
        if self.base <= 0:
            raise ValueError("base concentration must be > 0")
        if self.kind == "constant":
            pass
        elif self.kind == "linear":
            if self.rate < 0:
                raise ValueError("linear schedule needs rate >= 0")
        elif self.kind == "geometric":
            if self.rate < 1:
                raise ValueError("geometric schedule needs rate >= 1")
        else:
            raise ValueError(f"unknown schedule kind {self.kind!r}")

    def kappa(self, generation: int) -> float:
        if generation < 0:
            raise ValueError("generation must be >= 0")
        if self.kind == "constant":
            return self.base
        if self.kind == "linear":
            return self.base + self.rate * generation
        return self.base * self.rate**generation


def anneal_model(
    model: TypeMixtureCodebook, schedule: AnnealSchedule, generation: int
) -> TypeMixtureCodebook:
    """Replace the mixture concentration by the scheduled kappa(generation)."""
    return replace(model, concentration=schedule.kappa(generation))


_LAW_CACHE: dict = {}


def _law_key(model: CodebookModel):
    if isinstance(model, IIDCodebook):
        return ("iid", model.base.probs.tobytes(), model.word_length)
    if isinstance(model, UniformTypeCodebook):
        return ("utc", model.alphabet_size, model.word_length)
    return (
        "mix", model.center.probs.tobytes(), model.concentration, model.word_length,
    )


def type_law(model: CodebookModel) -> tuple[np.ndarray, np.ndarray]:
    """Exact probability of every type class under the model.

    Returns (types, probs): an (n_types, alphabet) count-vector array in
    colexicographic order, and the matching probability vector.  Refuses
    type spaces beyond the enumeration guard (use sampling instead).
    """
    key = _law_key(model)
    hit = _LAW_CACHE.get(key)
    if hit is not None:
        return hit
    k = model.alphabet_size
    L = model.word_length
    types = enumerate_types(L, k)
    if isinstance(model, IIDCodebook):
        base = model.base.probs
        with np.errstate(divide="ignore"):
            logb = np.log2(base)
        logsize = np.array(
            [log_type_class_size(TypeDistribution(t, L)) for t in types]
        )
        terms = np.where(types > 0, types * logb[None, :], 0.0)
        logp = logsize + terms.sum(axis=1)
        probs = np.exp2(logp)
        probs[np.any((types > 0) & (base[None, :] == 0), axis=1)] = 0.0
    elif isinstance(model, UniformTypeCodebook):
        probs = np.full(len(types), 1.0 / len(types))
    else:
        center = model.center
        weights = np.empty(len(types))
        for i, t in enumerate(types):
            div = kl_divergence(TypeDistribution(t, L).as_distribution(), center)
            weights[i] = 0.0 if math.isinf(div) else 2.0 ** (-model.concentration * div)
        total = weights.sum()
        if total <= 0:
            raise ValueError("type mixture has no feasible type (empty support)")
        probs = weights / total
    probs = probs / probs.sum()
    types.setflags(write=False)
    probs.setflags(write=False)
    _LAW_CACHE[key] = (types, probs)
    return types, probs


def _letters_from_uniforms(base: Distribution, u: np.ndarray) -> np.ndarray:
    cdf = np.cumsum(base.probs)
    k = base.alphabet_size
    if k <= 8:
        # threshold-count form of searchsorted; much faster on large blocks
        letters = np.zeros(u.shape, dtype=np.int8)
        for t in cdf[:-1]:
            letters += u >= t
        return letters
    letters = np.searchsorted(cdf, u, side="right")
    return np.minimum(letters, k - 1).astype(np.int64)


def _shuffle_rows(words: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Fisher-Yates shuffle of each row; u has one column per swap step."""
    L = words.shape[1]
    rows = np.arange(words.shape[0])
    for j in range(L - 1, 0, -1):
        k = np.minimum((u[:, L - 1 - j] * (j + 1)).astype(np.int64), j)
        wj = words[rows, j].copy()
        words[rows, j] = words[rows, k]
        words[rows, k] = wj
    return words


def _words_from_uniforms(model: CodebookModel, u: np.ndarray) -> np.ndarray:
    """Map a (B, L) block of uniforms to B codewords, one row each.

    Position 0 selects the type class (type-based models) and positions
    1..L-1 drive the within-class Fisher-Yates shuffle; the i.i.d. model
    consumes one uniform per letter.
    """
    L = model.word_length
    if isinstance(model, IIDCodebook):
        return _letters_from_uniforms(model.base, u)
    types, probs = type_law(model)
    cum = np.cumsum(probs)
    t_idx = np.minimum(
        np.searchsorted(cum, u[:, 0], side="right"), len(types) - 1
    )
    words = np.empty((u.shape[0], L), dtype=np.int64)
    for ti in np.unique(t_idx):
        rows = t_idx == ti
        words[rows] = np.repeat(
            np.arange(model.alphabet_size), types[ti]
        )[None, :]
    return _shuffle_rows(words, u[:, 1:])


def sample_codeword(model: CodebookModel, stream: SubStream) -> np.ndarray:
    """Draw one length-L codeword from the model's sampling law."""
    u = stream.next(model.word_length).reshape(1, -1)
    return _words_from_uniforms(model, u)[0]


def sample_codewords(
    model: CodebookModel, seed: int, domain: int, generation: int, indices
) -> np.ndarray:
    """Draw the codewords at the given substream indices, as a (B, L) array.

    Row b equals sample_codeword(model, SubStream(seed, domain, generation,
    indices[b])); the batch path exists for speed only.
    """
    u = uniform_grid(seed, domain, generation, indices, model.word_length)
    return _words_from_uniforms(model, u)


def codeword_log_prob(model: CodebookModel, word) -> float:
    """Exact log2 probability of a specific word under the model."""
    w = np.asarray(word, dtype=np.int64)
    if w.size != model.word_length:
        raise ValueError("word length does not match the model")
    k = model.alphabet_size
    if np.any(w < 0) or np.any(w >= k):
        raise ValueError("word contains a letter outside the alphabet")
    if isinstance(model, IIDCodebook):
        p = model.base.probs[w]
        if np.any(p == 0):
            return -math.inf
        return float(np.log2(p).sum())
    t = TypeDistribution(np.bincount(w, minlength=k), model.word_length)
    types, probs = type_law(model)
    pos = int(np.flatnonzero((types == t.counts).all(axis=1))[0])
    if probs[pos] == 0:
        return -math.inf
    return float(math.log2(probs[pos]) - log_type_class_size(t))
