"""Rate-distortion curves and the closed form they must reproduce.

For a binary source with bias p under Hamming distortion the curve is
known exactly: R(D) = h(p) - h(D) for D in [0, p], where h is the binary
entropy function.  The solver knows nothing about this formula, so the
comparison below is a genuine cross-check.
"""

import numpy as np

from nts_lab import binary_entropy, hamming, make_distribution, rdf_curve

P = make_distribution([0.4, 0.6])
points = rdf_curve(P, hamming(2), 9)

print(f"rate-distortion curve for P = {P.probs.tolist()}, Hamming distortion")
print(f"{'D':>8} {'R(D) solved':>12} {'R(D) closed':>12} {'|err|':>9}   Q*")
for pt in points:
    closed = max(binary_entropy(0.4) - binary_entropy(pt.distortion), 0.0)
    print(
        f"{pt.distortion:8.4f} {pt.rate:12.6f} {closed:12.6f} "
        f"{abs(pt.rate - closed):9.2e}   {np.round(pt.output_dist.probs, 4)}"
    )

print()
print("endpoints: R(0) = H(P) (lossless) and R(D_max) = 0, where the")
print("optimal output distribution collapses to the centroid letter.")
