"""One adaptive codec session, watched generation by generation.

Encoder and decoder start from the uniform codebook distribution Q0.
Each generation the encoder transmits one codeword index; both sides then
adopt the selected codeword's empirical type as the next codebook
distribution.  The codebook distribution Q_n drifts toward the
rate-distortion optimal output distribution Q* with no side information.
"""

import numpy as np

from nts_lab import (
    NtsConfig,
    hamming,
    kl_divergence,
    make_distribution,
    run_session,
    solve_at_distortion,
)

P = make_distribution([0.4, 0.6])
D = 0.25
point, _ = solve_at_distortion(P, hamming(2), D)
q_star = point.output_dist

config = NtsConfig(
    word_length=256, target_distortion=D, distortion=hamming(2),
    q0=make_distribution([0.5, 0.5]), max_search_index=2**17,
    session_seed=1, generations=30,
)
trace = run_session(P, config, reference_qstar=q_star)

print(f"source P = {P.probs.tolist()}, target distortion D = {D}")
print(f"optimal output Q* = {np.round(q_star.probs, 6).tolist()}, "
      f"R(P,D) = {point.rate:.6f} bits/symbol")
print(f"KL(Q*||Q0) = {kl_divergence(q_star, config.q0):.6f}")
print()
print(f"{'gen':>4} {'index':>8} {'bits':>5} {'distortion':>11} "
      f"{'Q_n(0)':>8} {'KL(Q*||Q_n)':>12}")
for n in range(trace.generations):
    if n < 10 or n % 5 == 0:
        print(f"{n:4d} {trace.indices[n]:8d} {trace.code_bits[n]:5d} "
              f"{trace.distortions[n]:11.4f} {trace.q_n[n][0]:8.4f} "
              f"{trace.kl_to_target[n]:12.6f}")
print()
print(f"final KL(Q*||Q_n) = {trace.kl_to_target[-1]:.6f} "
      f"(started at {trace.kl_to_target[0]:.6f} after one update)")
