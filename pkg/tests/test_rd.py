import math

import numpy as np
import pytest

from nts_lab.probability import (
    binary_entropy,
    entropy,
    kl_divergence,
    make_distribution,
    point_mass,
    uniform_distribution,
)
from nts_lab.rd import (
    DistortionMeasure,
    ba_fixed_slope_step,
    d_max,
    hamming,
    mismatched_rate,
    rdf_curve,
    solve_at_distortion,
    solve_fixed_slope,
)


def random_instance(rng, k):
    """A random source + k x k distortion with a nondegenerate RD problem."""
    while True:
        P = make_distribution(rng.dirichlet(np.ones(k)))
        meas = DistortionMeasure(rng.uniform(0.0, 1.0, size=(k, k)))
        dm, _ = d_max(P, meas)
        floor = float((P.probs @ meas.matrix.min(axis=1)))
        if dm - floor > 1e-3:
            return P, meas, dm, floor


class TestDMax:
    def test_symmetric_tie_lowest_index(self):
        assert d_max(make_distribution([0.5, 0.5]), hamming(2)) == (0.5, 0)

    def test_asymmetric(self):
        value, centroid = d_max(make_distribution([0.3, 0.7]), hamming(2))
        assert value == pytest.approx(0.3) and centroid == 1

    def test_point_mass_source(self):
        assert d_max(point_mass(2, 0), hamming(2)) == (0.0, 0)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            d_max(uniform_distribution(3), hamming(2))


class TestBaFixedSlopeStep:
    def test_zero_slope_fixed_point(self):
        P = make_distribution([0.3, 0.7])
        Q = make_distribution([0.2, 0.8])
        q_next, w = ba_fixed_slope_step(P, Q, hamming(2), 0.0)
        assert np.allclose(q_next.probs, Q.probs, atol=1e-15)
        assert np.allclose(w.rows, Q.probs[None, :], atol=1e-15)

    def test_zero_preservation(self):
        P = make_distribution([0.5, 0.5])
        q_next, _ = ba_fixed_slope_step(P, point_mass(2, 0), hamming(2), 2.0)
        assert q_next.probs.tolist() == [1.0, 0.0]

    def test_hand_evaluated_update(self):
        P = Q = make_distribution([0.5, 0.5])
        q_next, w = ba_fixed_slope_step(P, Q, hamming(2), 1.0)
        assert np.allclose(q_next.probs, [0.5, 0.5], atol=1e-12)
        assert np.allclose(np.diag(w.rows), 2 / 3, atol=1e-12)
        assert np.allclose(w.rows - np.diag(np.diag(w.rows)),
                           np.fliplr(np.diag([1 / 3, 1 / 3])), atol=1e-12)

    def test_zero_preservation_random(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            P, meas, _, _ = random_instance(rng, 3)
            q = rng.dirichlet(np.ones(3))
            q[rng.integers(0, 3)] = 0.0
            if q.sum() == 0:
                continue
            Q = make_distribution(q)
            q_next, _ = ba_fixed_slope_step(P, Q, meas, float(rng.uniform(0, 5)))
            assert np.all(q_next.probs[Q.probs == 0] == 0)

    def test_negative_slope_rejected(self):
        with pytest.raises(ValueError):
            ba_fixed_slope_step(
                uniform_distribution(2), uniform_distribution(2), hamming(2), -1
            )


class TestSolveFixedSlope:
    def test_zero_slope_centroid(self):
        P = make_distribution([0.3, 0.7])
        point, trace = solve_fixed_slope(P, hamming(2), 0.0)
        assert point.rate == 0.0
        assert point.distortion == pytest.approx(0.3)
        assert point.output_dist.probs.tolist() == [0.0, 1.0]
        assert trace.gaps.size == 0

    def test_binary_symmetric_closed_form(self):
        # for the BSC test channel at distortion D the slope is log2((1-D)/D)
        D = 0.1
        s = math.log2((1 - D) / D)
        point, _ = solve_fixed_slope(make_distribution([0.5, 0.5]), hamming(2), s)
        assert point.converged
        assert point.distortion == pytest.approx(D, abs=1e-9)
        assert point.rate == pytest.approx(1 - binary_entropy(D), abs=1e-9)

    def test_large_slope_lossless_limit(self):
        P = uniform_distribution(3)
        point, _ = solve_fixed_slope(P, hamming(3), 50.0)
        assert point.rate == pytest.approx(math.log2(3), abs=1e-6)
        assert point.distortion == pytest.approx(0.0, abs=1e-6)

    def test_lagrangian_monotone_along_iterations(self):
        rng = np.random.default_rng(5)
        for _ in range(10):
            P, meas, _, _ = random_instance(rng, 3)
            s = float(rng.uniform(0.5, 6.0))
            q = uniform_distribution(3)
            prev = math.inf
            for _ in range(60):
                q_next, w = ba_fixed_slope_step(P, q, meas, s)
                with np.errstate(divide="ignore", invalid="ignore"):
                    ratio = np.where(
                        w.rows > 0, np.log2(w.rows / q.probs[None, :]), 0.0
                    )
                rate = float(P.probs @ (w.rows * ratio).sum(axis=1))
                dist = float(P.probs @ (w.rows * meas.matrix).sum(axis=1))
                objective = rate + s * dist
                assert objective <= prev + 1e-10
                prev = objective
                q = q_next

    def test_trace_gaps_nonincreasing(self):
        point, trace = solve_fixed_slope(
            make_distribution([0.4, 0.6]), hamming(2), 2.0
        )
        assert np.all(trace.gaps >= -1e-9)
        assert np.all(np.diff(trace.gaps) <= 1e-9)


class TestSolveAtDistortion:
    def test_dmax_collapse(self):
        point, _ = solve_at_distortion(make_distribution([0.3, 0.7]), hamming(2), 0.3)
        assert point.rate == 0.0
        assert point.output_dist.probs.tolist() == [0.0, 1.0]

    def test_zero_distortion_lossless(self):
        P = make_distribution([0.5, 0.5])
        point, _ = solve_at_distortion(P, hamming(2), 0.0)
        assert point.rate == pytest.approx(1.0, abs=1e-6)

    def test_binary_closed_form(self):
        P = make_distribution([0.4, 0.6])
        point, _ = solve_at_distortion(P, hamming(2), 0.25)
        assert point.converged
        assert point.rate == pytest.approx(
            binary_entropy(0.4) - binary_entropy(0.25), abs=1e-6
        )
        # reverse-channel output formula Q*(minority) = (p - D) / (1 - 2D)
        assert point.output_dist.probs[0] == pytest.approx(0.3, abs=1e-6)

    def test_telescoping_bound(self):
        rng = np.random.default_rng(23)
        for k in (3, 4):
            for _ in range(5):
                P, meas, dm, floor = random_instance(rng, k)
                D = floor + 0.4 * (dm - floor)
                point, trace = solve_at_distortion(P, meas, D)
                bound = trace.initial_divergence
                prefix = np.cumsum(trace.gaps)
                assert np.all(prefix <= bound + 1e-6)
                n = np.arange(1, trace.gaps.size + 1)
                assert np.all(trace.gaps <= bound / n + 1e-6)
                assert np.all(np.diff(trace.gaps) <= 1e-9)

    def test_fixed_point_of_step(self):
        P = make_distribution([0.4, 0.6])
        point, _ = solve_at_distortion(P, hamming(2), 0.25, tol=1e-11)
        q_next, _ = ba_fixed_slope_step(P, point.output_dist, hamming(2), point.slope)
        assert np.abs(q_next.probs - point.output_dist.probs).max() < 10 * 1e-11

    def test_high_distortion_inactive_letters(self):
        rng = np.random.default_rng(71)
        shrunk = 0
        for _ in range(20):
            P, meas, dm, floor = random_instance(rng, 4)
            D = floor + 0.97 * (dm - floor)
            point, _ = solve_at_distortion(P, meas, D)
            if (point.output_dist.probs > 1e-6).sum() < 4:
                shrunk += 1
        assert shrunk >= 15  # support collapse dominates near D_max

    def test_negative_target_rejected(self):
        with pytest.raises(ValueError):
            solve_at_distortion(uniform_distribution(2), hamming(2), -0.1)


class TestMismatchedRate:
    def test_minimizer_consistency(self):
        P = make_distribution([0.4, 0.6])
        point, _ = solve_at_distortion(P, hamming(2), 0.25)
        r = mismatched_rate(P, point.output_dist, hamming(2), 0.25)
        assert r == pytest.approx(point.rate, abs=1e-6)

    def test_zero_when_budget_covers_q_centroid(self):
        P = make_distribution([0.5, 0.5])
        Q = make_distribution([0.25, 0.75])
        # with W = Q the expected distortion is 0.5; any budget >= that is free
        assert mismatched_rate(P, Q, hamming(2), 0.5) == 0.0
        assert mismatched_rate(P, Q, hamming(2), 0.9) == 0.0

    def test_grid_search_oracle(self):
        # brute-force over binary channels W(1|0)=a, W(1|1)=b at step 1e-3
        P = make_distribution([0.5, 0.5])
        Q = make_distribution([0.25, 0.75])
        D = 0.1
        grid = np.linspace(0.0, 1.0, 1001)
        a, b = np.meshgrid(grid, grid, indexing="ij")
        dist = 0.5 * a + 0.5 * (1 - b)
        with np.errstate(divide="ignore", invalid="ignore"):
            def term(w, qy):
                return np.where(w > 0, w * np.log2(w / qy), 0.0)

            rate = 0.5 * (term(1 - a, 0.25) + term(a, 0.75)) + 0.5 * (
                term(1 - b, 0.25) + term(b, 0.75)
            )
        feasible = dist <= D
        grid_min = float(rate[feasible].min())
        r = mismatched_rate(P, Q, hamming(2), D)
        assert r >= 1 - binary_entropy(D) - 1e-9  # above the matched rate
        assert r <= grid_min + 1e-9  # the grid solution is suboptimal
        assert r >= grid_min - 5e-3  # and close at the grid resolution

    def test_infeasible_target_rejected(self):
        P = make_distribution([0.5, 0.5])
        with pytest.raises(ValueError):
            mismatched_rate(P, point_mass(2, 0), hamming(2), 0.1)

    def test_gap_positive_for_mismatched_q(self):
        P = make_distribution([0.4, 0.6])
        point, _ = solve_at_distortion(P, hamming(2), 0.25)
        r_mismatched = mismatched_rate(
            P, make_distribution([0.5, 0.5]), hamming(2), 0.25
        )
        assert r_mismatched > point.rate


class TestRdfCurve:
    def test_endpoints(self):
        P = make_distribution([0.4, 0.6])
        points = rdf_curve(P, hamming(2), 5)
        assert points[0].rate == pytest.approx(entropy(P), abs=1e-6)
        assert points[-1].rate == 0.0
        assert points[-1].distortion == pytest.approx(0.4)

    def test_binary_interior_closed_form(self):
        P = make_distribution([0.4, 0.6])
        for point in rdf_curve(P, hamming(2), 11)[1:-1]:
            expected = binary_entropy(0.4) - binary_entropy(point.distortion)
            assert point.rate == pytest.approx(expected, abs=1e-6)

    def test_monotone_random_instance(self):
        rng = np.random.default_rng(9)
        P, meas, _, _ = random_instance(rng, 4)
        rates = [pt.rate for pt in rdf_curve(P, meas, 9)]
        assert np.all(np.diff(rates) <= 1e-8)

    def test_n_points_guard(self):
        with pytest.raises(ValueError):
            rdf_curve(uniform_distribution(2), hamming(2), 1)
