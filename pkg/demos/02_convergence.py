"""Convergence diagnostics of the fixed-distortion solver.

Each iteration produces an intermediate output distribution Q_n whose
excess rate R(P, Q_n, D) - R(P, D) is recorded.  Two facts are visible
below: the gaps telescope (their sum never exceeds KL(Q*||Q0)), and the
N-th gap is bounded by KL(Q*||Q0)/N, an O(1/N) decay.
"""

import numpy as np

from nts_lab import DistortionMeasure, d_max, make_distribution, solve_at_distortion

rng = np.random.default_rng(11)
P = make_distribution(rng.dirichlet(np.ones(4)))
meas = DistortionMeasure(rng.uniform(0, 1, size=(4, 4)))

# pick a distortion strictly between the zero-rate boundary D_max and the
# smallest achievable distortion, where the iteration is nontrivial
dmax_value, _ = d_max(P, meas)
floor = float(P.probs @ meas.matrix.min(axis=1))
D = floor + 0.35 * (dmax_value - floor)

point, trace = solve_at_distortion(P, meas, D)
bound = trace.initial_divergence

print(f"solved R = {point.rate:.6f} at D = {point.distortion:.6f} "
      f"in {point.iterations} iterations")
print(f"KL(Q*||Q0) = {bound:.6f} bits (the telescoping budget)")
print()
print(f"{'n':>4} {'gap_n':>12} {'sum gaps':>12} {'bound/n':>12}")
cumulative = 0.0
for n, gap in enumerate(trace.gaps[:12], start=1):
    cumulative += gap
    print(f"{n:4d} {gap:12.3e} {cumulative:12.6f} {bound / n:12.3e}")

prefix = np.cumsum(trace.gaps)
n = np.arange(1, trace.gaps.size + 1)
print()
print(f"all prefixes within budget: {bool(np.all(prefix <= bound + 1e-6))}")
print(f"all gaps within O(1/N) bound: "
      f"{bool(np.all(trace.gaps <= bound / n + 1e-6))}")
