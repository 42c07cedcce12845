"""The natural-type-selection codec loop.

Each generation alternates a compression phase (scan the generation's
codebook for the first codeword within the distortion budget, transmit its
index) and a learning phase (both sides take the matched codeword's type
and fold it into the next codebook distribution).  Codebooks are
regenerated per generation from counter-keyed substreams, so encoder and
decoder stay bit-exactly synchronized with no side information.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .codebooks import (
    AnnealSchedule,
    CodebookModel,
    IIDCodebook,
    TypeMixtureCodebook,
    UniformTypeCodebook,
    sample_codewords,
)
from . import fastsearch
from .probability import Distribution, TypeDistribution, empirical_type, kl_divergence
from .rd import DistortionMeasure
from .stream import uniform_block

DOMAIN_CODEBOOK = 0
DOMAIN_SOURCE = 1

_SEARCH_CHUNK = 1024


class SyncError(RuntimeError):
    """Encoder and decoder states diverged; always an implementation bug."""


@dataclass(frozen=True)
class HardUpdate:
    """Adopt the matched type as the next codebook distribution."""


@dataclass(frozen=True)
class SmoothedUpdate:
    """Blend: Q_next = (1 - gamma) Q + gamma * type."""

    gamma: float = 0.1

    def __post_init__(self):
        if not 0 < self.gamma <= 1:
            raise ValueError("gamma must be in (0, 1]")


@dataclass(frozen=True)
class BlockAverageUpdate:
    """Mean of the last `block` matched types (hard until that many exist)."""

    block: int = 4

    def __post_init__(self):
        if self.block < 1:
            raise ValueError("block must be >= 1")


UpdatePolicy = HardUpdate | SmoothedUpdate | BlockAverageUpdate


@dataclass(frozen=True, eq=False)
class NtsConfig:
    word_length: int
    target_distortion: float
    distortion: DistortionMeasure
    q0: Distribution
    model_kind: str = "iid"  # "iid" | "uniform_types" | "type_mixture"
    concentration: float = 4.0
    schedule: AnnealSchedule | None = None
    update_policy: UpdatePolicy = HardUpdate()
    max_search_index: int = 2**20
    session_seed: int = 0
    generations: int = 0
    freeze_updates: bool = False

    def __post_init__(self):
        if self.word_length < 1:
            raise ValueError("word_length must be >= 1")
        if self.target_distortion <= 0:
            raise ValueError("target_distortion must be > 0")
        if self.max_search_index < 1:
            raise ValueError("max_search_index must be >= 1")
        if self.generations < 0:
            raise ValueError("generations must be >= 0")
        if self.model_kind not in ("iid", "uniform_types", "type_mixture"):
            raise ValueError(f"unknown model_kind {self.model_kind!r}")
        if self.q0.alphabet_size != self.distortion.recon_alphabet:
            raise ValueError("q0 size must match the reconstruction alphabet")


@dataclass(frozen=True, eq=False)
class MatchResult:
    index: int
    codeword: np.ndarray
    distortion: float
    matched: bool


@dataclass(frozen=True, eq=False)
class GenerationRecord:
    generation: int
    index: int
    code_bits: int
    rate: float
    distortion: float
    matched: bool
    codeword: np.ndarray


@dataclass(frozen=True, eq=False)
class CodecState:
    config: NtsConfig
    generation: int = 0
    q_n: Distribution = None
    recent_types: tuple = ()
    last: GenerationRecord | None = None


def initial_state(config: NtsConfig) -> CodecState:
    return CodecState(config=config, generation=0, q_n=config.q0)


def model_for(config: NtsConfig, q_n: Distribution, generation: int) -> CodebookModel:
    """The codebook model in force at a given generation."""
    if config.model_kind == "iid":
        return IIDCodebook(base=q_n, word_length=config.word_length)
    if config.model_kind == "uniform_types":
        return UniformTypeCodebook(
            alphabet_size=q_n.alphabet_size, word_length=config.word_length
        )
    schedule = config.schedule or AnnealSchedule("constant", config.concentration)
    return TypeMixtureCodebook(
        center=q_n, concentration=schedule.kappa(generation),
        word_length=config.word_length,
    )


def codeword_at(
    session_seed: int, generation: int, index: int, model: CodebookModel
) -> np.ndarray:
    """The codeword at a codebook position; a pure function of its arguments."""
    if index < 1:
        raise ValueError("codeword indices start at 1")
    return sample_codewords(
        model, session_seed, DOMAIN_CODEBOOK, generation, [index]
    )[0]


def index_code_length(index: int) -> int:
    """Elias-gamma code length of a positive integer: 2*floor(log2 i) + 1."""
    if index < 1:
        raise ValueError("index must be >= 1")
    return 2 * (int(index).bit_length() - 1) + 1


def d_match_search(
    source_word: np.ndarray,
    config: NtsConfig,
    generation: int,
    model: CodebookModel,
) -> MatchResult:
    """Scan indices 1..M for the first codeword within the distortion budget.

    Falls back to the minimum-distortion codeword over the whole scan
    (lowest index on ties) when nothing matches; the fallback is flagged
    with matched=False.
    """
    src = np.asarray(source_word)
    if src.size != config.word_length:
        raise ValueError("source word length does not match the configuration")
    m = config.max_search_index
    target = config.target_distortion
    if fastsearch.applicable(model, config.distortion.matrix):
        index, hit = fastsearch.search(
            model, config.distortion.matrix, src, target,
            config.session_seed, DOMAIN_CODEBOOK, generation, m,
        )
        word = codeword_at(config.session_seed, generation, index, model)
        dist = float(config.distortion.matrix[src, word].mean())
        return MatchResult(index=index, codeword=word, distortion=dist, matched=hit)
    best_index, best_dist, best_word = 0, math.inf, None
    start = 1
    while start <= m:
        stop = min(start + _SEARCH_CHUNK, m + 1)
        idx = np.arange(start, stop)
        words = sample_codewords(
            model, config.session_seed, DOMAIN_CODEBOOK, generation, idx
        )
        dists = config.distortion.matrix[src[None, :], words].mean(axis=1)
        hits = np.flatnonzero(dists <= target)
        limit = hits[0] + 1 if hits.size else dists.size
        arg = int(np.argmin(dists[:limit]))
        if dists[arg] < best_dist:
            best_index, best_dist = int(idx[arg]), float(dists[arg])
            best_word = words[arg]
        if hits.size:
            h = int(hits[0])
            return MatchResult(
                index=int(idx[h]), codeword=words[h],
                distortion=float(dists[h]), matched=True,
            )
        start = stop
    return MatchResult(
        index=best_index, codeword=best_word, distortion=best_dist, matched=False
    )


def learning_update(
    q_n: Distribution,
    matched_type: TypeDistribution,
    policy: UpdatePolicy,
    history: tuple = (),
) -> Distribution:
    """Fold a matched type into the codebook distribution.

    `history` holds previously matched types (oldest first, current one
    excluded); only the block-average policy consults it.
    """
    t = matched_type.as_distribution()
    if q_n.alphabet_size != t.alphabet_size:
        raise ValueError("alphabet sizes differ")
    if isinstance(policy, HardUpdate):
        return t
    if isinstance(policy, SmoothedUpdate):
        g = policy.gamma
        return Distribution((1 - g) * q_n.probs + g * t.probs)
    window = history + (matched_type,)
    if len(window) < policy.block:
        return t
    window = window[-policy.block:]
    mean = np.mean([w.as_distribution().probs for w in window], axis=0)
    return Distribution(mean / mean.sum())


def _advance(state: CodecState, codeword: np.ndarray, record: GenerationRecord) -> CodecState:
    cfg = state.config
    matched_type = empirical_type(codeword, cfg.q0.alphabet_size)
    if cfg.freeze_updates:
        q_next, recent = state.q_n, state.recent_types
    else:
        q_next = learning_update(
            state.q_n, matched_type, cfg.update_policy, state.recent_types
        )
        recent = state.recent_types + (matched_type,)
        if isinstance(cfg.update_policy, BlockAverageUpdate):
            recent = recent[-cfg.update_policy.block:]
        else:
            recent = ()
    return replace(
        state, generation=state.generation + 1, q_n=q_next,
        recent_types=recent, last=record,
    )


def encode_word(state: CodecState, source_word: np.ndarray) -> tuple[int, CodecState]:
    """Compression + learning phases for one source word, encoder side."""
    cfg = state.config
    model = model_for(cfg, state.q_n, state.generation)
    result = d_match_search(source_word, cfg, state.generation, model)
    bits = index_code_length(result.index)
    record = GenerationRecord(
        generation=state.generation, index=result.index, code_bits=bits,
        rate=bits / cfg.word_length, distortion=result.distortion,
        matched=result.matched, codeword=result.codeword,
    )
    return result.index, _advance(state, result.codeword, record)


def decode_word(state: CodecState, index: int) -> tuple[np.ndarray, CodecState]:
    """Reconstruct the transmitted index and apply the identical update."""
    cfg = state.config
    if index < 1 or index > cfg.max_search_index:
        raise ValueError(
            f"index {index} outside 1..{cfg.max_search_index}: corrupted stream"
        )
    model = model_for(cfg, state.q_n, state.generation)
    word = codeword_at(cfg.session_seed, state.generation, index, model)
    bits = index_code_length(index)
    record = GenerationRecord(
        generation=state.generation, index=index, code_bits=bits,
        rate=bits / cfg.word_length, distortion=math.nan, matched=True,
        codeword=word,
    )
    return word, _advance(state, word, record)


@dataclass(eq=False)
class SessionTrace:
    """Per-generation record of one codec session."""

    generations: int
    q_n: np.ndarray  # (generations, alphabet), distribution after update n
    indices: np.ndarray
    code_bits: np.ndarray
    rates: np.ndarray
    distortions: np.ndarray
    matched: np.ndarray
    kl_to_target: np.ndarray
    matched_types: np.ndarray  # (generations, alphabet) codeword letter counts

    CSV_HEADER = (
        "generation,index,code_bits,rate_bits_per_symbol,distortion,"
        "matched,q_n,kl_to_target"
    )

    def csv_rows(self):
        yield self.CSV_HEADER
        for n in range(self.generations):
            q = ";".join(f"{v:.12g}" for v in self.q_n[n])
            yield (
                f"{n},{self.indices[n]},{self.code_bits[n]},"
                f"{self.rates[n]:.12g},{self.distortions[n]:.12g},"
                f"{'true' if self.matched[n] else 'false'},{q},"
                f"{self.kl_to_target[n]:.12g}"
            )

    def write_csv(self, path):
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for row in self.csv_rows():
                fh.write(row + "\n")

    @property
    def match_fail_count(self) -> int:
        return int((~self.matched).sum())


def draw_source_word(P: Distribution, config: NtsConfig, generation: int) -> np.ndarray:
    """The generation's source word, i.i.d. from P on the source substream."""
    u = uniform_block(
        config.session_seed, DOMAIN_SOURCE, generation, 0, config.word_length
    )
    cdf = np.cumsum(P.probs)
    return np.minimum(
        np.searchsorted(cdf, u, side="right"), P.alphabet_size - 1
    ).astype(np.int64)


def run_session(
    P: Distribution,
    config: NtsConfig,
    reference_qstar: Distribution | None = None,
) -> SessionTrace:
    """Run paired encoder/decoder sessions and return the encoder trace.

    Decoder state is rebuilt from transmitted indices only and asserted
    bit-identical to the encoder every generation (a SyncError here is an
    implementation bug, never a valid outcome).
    """
    if P.alphabet_size != config.distortion.source_alphabet:
        raise ValueError("source distribution does not match distortion matrix")
    n_gen = config.generations
    k = config.q0.alphabet_size
    q_hist = np.empty((n_gen, k))
    indices = np.empty(n_gen, dtype=np.int64)
    code_bits = np.empty(n_gen, dtype=np.int64)
    rates = np.empty(n_gen)
    distortions = np.empty(n_gen)
    matched = np.empty(n_gen, dtype=bool)
    kls = np.full(n_gen, math.nan)
    mtypes = np.empty((n_gen, k), dtype=np.int64)

    enc = initial_state(config)
    dec = initial_state(config)
    for n in range(n_gen):
        src = draw_source_word(P, config, n)
        index, enc = encode_word(enc, src)
        recon, dec = decode_word(dec, index)
        if not (
            dec.generation == enc.generation
            and np.array_equal(dec.q_n.probs, enc.q_n.probs)
            and np.array_equal(recon, enc.last.codeword)
        ):
            raise SyncError(f"decoder diverged from encoder at generation {n}")
        rec = enc.last
        q_hist[n] = enc.q_n.probs
        indices[n] = rec.index
        code_bits[n] = rec.code_bits
        rates[n] = rec.rate
        distortions[n] = rec.distortion
        matched[n] = rec.matched
        mtypes[n] = np.bincount(rec.codeword, minlength=k)
        if reference_qstar is not None:
            kls[n] = kl_divergence(reference_qstar, enc.q_n)
    return SessionTrace(
        generations=n_gen, q_n=q_hist, indices=indices, code_bits=code_bits,
        rates=rates, distortions=distortions, matched=matched, kl_to_target=kls,
        matched_types=mtypes,
    )
