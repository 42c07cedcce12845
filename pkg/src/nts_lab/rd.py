"""Blahut-Arimoto rate-distortion solvers on finite alphabets.

Fixed-slope and fixed-distortion variants, the mismatched rate R(P, Q, D)
achievable with a constrained output distribution Q, the zero-rate
distortion D_max, and per-iteration convergence-gap diagnostics.

All rates are in bits per symbol.  The fixed-distortion solver alternates
between the closed-form minimizing test channel at the target distortion
(an exponential-family channel, with the slope found by root search) and
the output-marginal update; its per-iteration rate gaps satisfy the
telescoping bound sum(gaps) <= KL(Q_final || Q_initial).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .probability import Distribution, _frozen, kl_divergence, uniform_distribution

_LN2 = math.log(2.0)

DEFAULT_TOL = 1e-9
DEFAULT_MAX_ITER = 100_000
_SLOPE_HI_INIT = 50.0
_SLOPE_HI_MAX = 2.0**16
_DIST_TOL = 1e-13


@dataclass(frozen=True, eq=False)
class DistortionMeasure:
    """A nonnegative |X| x |Y| single-letter distortion matrix."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.ndim != 2 or m.size < 1:
            raise ValueError("distortion matrix must be 2-D and nonempty")
        if not np.all(np.isfinite(m)) or np.any(m < 0):
            raise ValueError("distortion entries must be finite and >= 0")
        object.__setattr__(self, "matrix", _frozen(m))

    @property
    def source_alphabet(self) -> int:
        return self.matrix.shape[0]

    @property
    def recon_alphabet(self) -> int:
        return self.matrix.shape[1]


def hamming(alphabet_size: int) -> DistortionMeasure:
    return DistortionMeasure(1.0 - np.eye(alphabet_size))


@dataclass(frozen=True, eq=False)
class TestChannel:
    """A conditional distribution W(y|x), one row per source letter."""

    rows: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.rows, dtype=float)
        if r.ndim != 2:
            raise ValueError("rows must be a 2-D matrix")
        if np.any(r < 0) or not np.all(np.isfinite(r)):
            raise ValueError("channel entries must be finite and >= 0")
        if not np.allclose(r.sum(axis=1), 1.0, atol=1e-9):
            raise ValueError("every channel row must sum to 1")
        object.__setattr__(self, "rows", _frozen(r))


@dataclass(frozen=True, eq=False)
class RDPoint:
    """A solved point on the rate-distortion curve."""

    slope: float
    rate: float
    distortion: float
    output_dist: Distribution
    iterations: int
    converged: bool = True
    tolerance_flag: bool = False


@dataclass(frozen=True, eq=False)
class ConvergenceTrace:
    """Per-iteration rate gaps of a solver run.

    For the fixed-distortion solver, gaps[n] = R(P, Q_n, D) - R(P, D); for
    the fixed-slope solver, gaps[n] is the Lagrangian excess (R + sD)_n
    minus its converged value.  initial_divergence is KL(Q_final || Q_0).
    """

    gaps: np.ndarray
    initial_divergence: float

    def __post_init__(self):
        object.__setattr__(
            self, "gaps", _frozen(np.asarray(self.gaps, dtype=float))
        )


def _check_dims(P: Distribution, d: DistortionMeasure):
    if P.alphabet_size != d.source_alphabet:
        raise ValueError("source alphabet size does not match distortion matrix")


def d_max(P: Distribution, d: DistortionMeasure) -> tuple[float, int]:
    """Smallest zero-rate distortion and the centroid letter attaining it.

    Ties are broken by the lowest reconstruction index.
    """
    _check_dims(P, d)
    per_letter = P.probs @ d.matrix
    centroid = int(np.argmin(per_letter))
    return float(per_letter[centroid]), centroid


def _channel_at_slope(P: Distribution, Q: Distribution, d: DistortionMeasure, s: float):
    """Closed-form channel W(y|x) ~ Q(y) 2^{-s d(x,y)}, in log space.

    Returns (W, rate, distortion, log_normalizers) where
    log_normalizers[x] = log2 sum_y Q(y) 2^{-s d(x,y)}.
    """
    with np.errstate(divide="ignore"):
        logq = np.log2(Q.probs)
    logw = logq[None, :] - s * d.matrix
    rowmax = logw.max(axis=1, keepdims=True)
    if not np.all(np.isfinite(rowmax)):
        raise ValueError(
            "channel row normalizer is zero: Q has no mass on any "
            "finite-distortion letter for some source letter"
        )
    w = np.exp2(logw - rowmax)
    z = w.sum(axis=1, keepdims=True)
    w = w / z
    logz = (np.log2(z) + rowmax).ravel()
    # rate = sum_x P(x) sum_y W log2(W/Q) = sum_x P(x) (-s E[d|x] - logz[x]) ... computed directly
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(w > 0, logw - rowmax - np.log2(z) - logq[None, :], 0.0)
    rate = float(P.probs @ (w * ratio).sum(axis=1))
    dist = float(P.probs @ (w * d.matrix).sum(axis=1))
    return w, max(rate, 0.0), dist, logz


def ba_fixed_slope_step(
    P: Distribution, Q: Distribution, d: DistortionMeasure, s: float
) -> tuple[Distribution, TestChannel]:
    """One fixed-slope Blahut update of the output distribution.

    W(y|x) = Q(y) 2^{-s d(x,y)} / Z_x and Q_next(y) = sum_x P(x) W(y|x).
    Letters with Q(y) = 0 keep probability 0.
    """
    _check_dims(P, d)
    if Q.alphabet_size != d.recon_alphabet:
        raise ValueError("output alphabet size does not match distortion matrix")
    if s < 0:
        raise ValueError("slope must be >= 0")
    w, _, _, _ = _channel_at_slope(P, Q, d, s)
    q_next = P.probs @ w
    q_next = q_next / q_next.sum()
    return Distribution(q_next), TestChannel(w)


def _support_floor(P: Distribution, Q: Distribution, d: DistortionMeasure) -> float:
    """Minimum expected distortion achievable with rows supported on supp(Q)."""
    sup = Q.support()
    return float(P.probs @ d.matrix[:, sup].min(axis=1))


def _constrained_channel(
    P: Distribution,
    Q: Distribution,
    d: DistortionMeasure,
    d_target: float,
    s_init: float | None = None,
):
    """Minimize sum_x P(x) D(W_x || Q) over channels with E[d] <= d_target.

    The minimizer lies in the exponential family W ~ Q 2^{-s d}; the slope s
    is found by bracketed root search on the monotone map s -> E[d](s).
    Returns a dict with the channel, rate, distortion, slope, per-row log
    normalizers, and a flag set when the slope bracket hit its cap before
    resolving the target distortion.
    """
    _check_dims(P, d)
    if Q.alphabet_size != d.recon_alphabet:
        raise ValueError("output alphabet size does not match distortion matrix")
    w0, r0, d0, logz0 = _channel_at_slope(P, Q, d, 0.0)
    if d_target >= d0:
        # the unconstrained minimum W = Q already meets the distortion budget
        return dict(W=w0, rate=0.0, distortion=d0, slope=0.0, logz=logz0, flag=False)
    floor = _support_floor(P, Q, d)
    if d_target < floor - 1e-12:
        raise ValueError(
            f"target distortion {d_target} is below the minimum {floor} "
            "achievable on the support of Q"
        )

    def dist_at(s):
        return _channel_at_slope(P, Q, d, s)[2]

    # bracket the slope: distortion decreases monotonically in s
    lo = 0.0
    if s_init is not None and s_init > 0:
        hi = max(s_init, 1e-6)
        while dist_at(hi) > d_target and hi < _SLOPE_HI_MAX:
            lo = hi
            hi = min(hi * 2.0, _SLOPE_HI_MAX)
        if dist_at(hi) <= d_target and s_init is not None:
            # tighten the left edge near the warm start when possible
            cand = max(lo, s_init / 2.0)
            if dist_at(cand) > d_target:
                lo = cand
    else:
        hi = _SLOPE_HI_INIT
        while dist_at(hi) > d_target and hi < _SLOPE_HI_MAX:
            lo = hi
            hi = min(hi * 2.0, _SLOPE_HI_MAX)
    flag = False
    if dist_at(hi) > d_target:
        if abs(dist_at(hi) - d_target) > _DIST_TOL:
            flag = True
        s = hi
    else:
        s = brentq(
            lambda t: dist_at(t) - d_target, lo, hi, xtol=1e-14, rtol=8.9e-16,
            maxiter=300,
        )
        if dist_at(s) > d_target:
            # return the feasible edge of the final bracket
            step = max(abs(s) * 1e-12, 1e-14)
            while dist_at(s) > d_target and s < hi:
                s = min(s + step, hi)
                step *= 2.0
    w, rate, dist, logz = _channel_at_slope(P, Q, d, s)
    return dict(W=w, rate=rate, distortion=dist, slope=float(s), logz=logz, flag=flag)


def mismatched_rate(
    P: Distribution, Q: Distribution, d: DistortionMeasure, d_target: float
) -> float:
    """R(P, Q, D): min over channels supported on supp(Q) with E[d] <= D of
    sum_x P(x) W(y|x) log2(W(y|x) / Q(y)), in bits."""
    return _constrained_channel(P, Q, d, d_target)["rate"]


def _gap_bound(P: Distribution, Q: Distribution, d: DistortionMeasure, s, logz) -> float:
    """Certified optimality gap (max_y c_y - 1)/ln 2 in bits, where
    c_y = sum_x P(x) 2^{-s d(x,y)} / Z_x.  Follows from convexity of the
    objective in Q over the simplex."""
    expo = -s * d.matrix - logz[:, None]
    with np.errstate(over="ignore"):
        c = P.probs @ np.exp2(expo)
    return float(max(c.max() - 1.0, 0.0) / _LN2)


def _centroid_point(P: Distribution, d: DistortionMeasure) -> tuple[RDPoint, ConvergenceTrace]:
    value, centroid = d_max(P, d)
    q = np.zeros(d.recon_alphabet)
    q[centroid] = 1.0
    qd = Distribution(q)
    point = RDPoint(
        slope=0.0, rate=0.0, distortion=value, output_dist=qd, iterations=0,
        converged=True,
    )
    trace = ConvergenceTrace(
        gaps=np.empty(0),
        initial_divergence=kl_divergence(qd, uniform_distribution(d.recon_alphabet)),
    )
    return point, trace


def solve_fixed_slope(
    P: Distribution,
    d: DistortionMeasure,
    s: float,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> tuple[RDPoint, ConvergenceTrace]:
    """Blahut iteration at a fixed slope s, from the uniform output start.

    Stops when the variational lower/upper bound gap on the Lagrangian
    R + sD falls below tol.  At s = 0 the iteration is degenerate (every Q
    is a fixed point), so the analytic zero-rate centroid solution is
    returned directly.
    """
    _check_dims(P, d)
    if s < 0:
        raise ValueError("slope must be >= 0")
    if tol <= 0 or max_iter < 1:
        raise ValueError("tol must be > 0 and max_iter >= 1")
    if s == 0.0:
        return _centroid_point(P, d)

    q0 = uniform_distribution(d.recon_alphabet)
    q = q0
    objectives = []
    converged = False
    rate = dist = 0.0
    n = 0
    for n in range(1, max_iter + 1):
        w, rate, dist, logz = _channel_at_slope(P, q, d, s)
        objectives.append(rate + s * dist)
        bound = _gap_bound(P, q, d, s, logz)
        q_next = P.probs @ w
        q = Distribution(q_next / q_next.sum())
        if bound < tol:
            converged = True
            break
    gaps = np.asarray(objectives) - objectives[-1]
    point = RDPoint(
        slope=float(s), rate=rate, distortion=dist, output_dist=q,
        iterations=n, converged=converged,
    )
    trace = ConvergenceTrace(gaps=gaps, initial_divergence=kl_divergence(q, q0))
    return point, trace


def solve_at_distortion(
    P: Distribution,
    d: DistortionMeasure,
    d_target: float,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> tuple[RDPoint, ConvergenceTrace]:
    """Fixed-distortion Blahut: compute R(P, D) at a target distortion.

    Alternates the closed-form distortion-constrained channel (slope found
    by root search, warm-started between iterations) with the output
    marginal update.  The recorded per-iteration gaps R(P, Q_n, D) - R(P, D)
    are non-increasing and telescope below KL(Q* || Q_0).

    At d_target >= D_max the analytic centroid solution is returned.
    """
    _check_dims(P, d)
    if d_target < 0:
        raise ValueError("target distortion must be >= 0")
    if tol <= 0 or max_iter < 1:
        raise ValueError("tol must be > 0 and max_iter >= 1")
    dmax_value, _ = d_max(P, d)
    if d_target >= dmax_value:
        return _centroid_point(P, d)

    q0 = uniform_distribution(d.recon_alphabet)
    q = q0
    rates = []
    converged = False
    flag = False
    sol = None
    n = 0
    s_prev = None
    for n in range(1, max_iter + 1):
        sol = _constrained_channel(P, q, d, d_target, s_init=s_prev)
        s_prev = sol["slope"]
        flag = flag or sol["flag"]
        rates.append(sol["rate"])
        bound = _gap_bound(P, q, d, sol["slope"], sol["logz"])
        q_next = P.probs @ sol["W"]
        q = Distribution(q_next / q_next.sum())
        if bound < tol:
            converged = True
            break
    gaps = np.asarray(rates) - rates[-1]
    point = RDPoint(
        slope=sol["slope"], rate=sol["rate"], distortion=sol["distortion"],
        output_dist=q, iterations=n, converged=converged, tolerance_flag=flag,
    )
    trace = ConvergenceTrace(gaps=gaps, initial_divergence=kl_divergence(q, q0))
    return point, trace


def rdf_curve(
    P: Distribution,
    d: DistortionMeasure,
    n_points: int,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> list[RDPoint]:
    """RD points at n_points distortions linearly spaced on [D_min, D_max].

    D_min = sum_x P(x) min_y d(x,y) is the smallest achievable distortion;
    it equals 0 exactly when every source letter has a zero-distortion
    reproduction (e.g. Hamming), recovering the usual [0, D_max] grid.
    """
    if n_points < 2:
        raise ValueError("n_points must be >= 2")
    dmax_value, _ = d_max(P, d)
    d_floor = float(P.probs @ d.matrix.min(axis=1))
    points = []
    for dt in np.linspace(d_floor, dmax_value, n_points):
        point, _ = solve_at_distortion(P, d, float(dt), tol=tol, max_iter=max_iter)
        points.append(point)
    return points
