"""Optional JIT fast path for the d-match search.

Replays exactly the same counter-stream arithmetic as the numpy batch
sampler, but candidate by candidate with early abandonment: a codeword is
dropped as soon as its running distortion sum can no longer produce a
d-match or improve on the best fallback seen so far.  Results are
bit-identical to the reference scan by construction; only applicable to
i.i.d. models on small alphabets with integer-valued distortion matrices,
where the per-word distortion comparison is exact integer arithmetic.
"""

from __future__ import annotations

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a hard dependency in practice
    HAVE_NUMBA = False

    def njit(*a, **k):
        def wrap(f):
            return f

        return wrap

_PHI = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


@njit(cache=True, nogil=True)
def _scan(h_gen, m, src, thresholds, dmat, match_sum_max, L):
    """First-match / best-fallback scan over codeword indices 1..m.

    h_gen is the premixed (key, generation) hash; thresholds are the
    integer images of the base-distribution cdf cut points, so the letter
    at each position equals the count of thresholds at or below the
    53-bit hash output (identical to the uniform >= cdf comparison).
    Returns (match_index, best_index, best_sum); match_index is 0 when no
    codeword meets the distortion budget.
    """
    best_idx = np.int64(0)
    best_sum = np.int64(1) << 60
    k1 = thresholds.shape[0]
    for idx in range(1, m + 1):
        h2 = h_gen + np.uint64(idx) * _PHI
        h2 = (h2 ^ (h2 >> np.uint64(30))) * _M1
        h2 = (h2 ^ (h2 >> np.uint64(27))) * _M2
        h2 = h2 ^ (h2 >> np.uint64(31))
        prune = best_sum - 1
        if prune < match_sum_max:
            prune = match_sum_max
        c = np.int64(0)
        pos = 0
        while pos < L:
            h = h2 + np.uint64(pos) * _PHI
            h = (h ^ (h >> np.uint64(30))) * _M1
            h = (h ^ (h >> np.uint64(27))) * _M2
            h = h ^ (h >> np.uint64(31))
            hs = h >> np.uint64(11)
            letter = 0
            for t in range(k1):
                if hs >= thresholds[t]:
                    letter += 1
            c += dmat[src[pos], letter]
            if c > prune:
                break
            pos += 1
        if pos == L:
            if c <= match_sum_max:
                return idx, best_idx, best_sum
            if c < best_sum:
                best_idx = np.int64(idx)
                best_sum = c
    return 0, best_idx, best_sum


def applicable(model, distortion_matrix) -> bool:
    from .codebooks import IIDCodebook

    if not HAVE_NUMBA or not isinstance(model, IIDCodebook):
        return False
    if model.alphabet_size > 8:
        return False
    return bool(np.all(distortion_matrix == np.rint(distortion_matrix)))


def search(model, distortion_matrix, source_word, target, seed, domain, generation, m):
    """Exact fast-path equivalent of the chunked reference scan.

    Returns (index, matched); the caller regenerates the winning codeword
    and its distortion through the ordinary batch path.
    """
    from .stream import stream_key

    L = model.word_length
    cdf = np.cumsum(model.base.probs)
    # exact integer image of the float comparison u >= cdf[t]:
    # u = (h >> 11) * 2^-53 >= c  <=>  (h >> 11) >= ceil(c * 2^53)
    thresholds = np.array(
        [min(int(np.ceil(float(c) * 2.0**53)), 1 << 53) for c in cdf[:-1]],
        dtype=np.uint64,
    )
    dmat = np.rint(distortion_matrix).astype(np.int64)
    # largest integer sum whose float mean passes the reference comparison
    # (row sums of small integers are exact, so mean == sum / L in float64)
    smax = int(np.floor(target * L)) + 2
    while smax >= 0 and not (smax / L <= target):
        smax -= 1
    with np.errstate(over="ignore"):
        h_gen = (stream_key(seed, domain) + np.uint64(generation) * _PHI)
        h_gen = (h_gen ^ (h_gen >> np.uint64(30))) * _M1
        h_gen = (h_gen ^ (h_gen >> np.uint64(27))) * _M2
        h_gen = h_gen ^ (h_gen >> np.uint64(31))
    src = np.ascontiguousarray(np.asarray(source_word, dtype=np.int64))
    match_idx, best_idx, best_sum = _scan(
        h_gen, int(m), src, thresholds, dmat, np.int64(smax), int(L)
    )
    if match_idx > 0:
        return int(match_idx), True
    return int(best_idx), False
