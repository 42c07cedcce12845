"""The three codeword sampling laws and the annealing knob between them.

An i.i.d. codebook produces types concentrated near its base distribution
(exponentially few atypical words); a uniform-over-type-classes codebook
spreads mass evenly over all types; the mixture law interpolates via a
concentration parameter kappa: weight(type) ~ 2^(-kappa * KL(type||center)).
"""

import numpy as np

from nts_lab import (
    AnnealSchedule,
    IIDCodebook,
    TypeMixtureCodebook,
    UniformTypeCodebook,
    anneal_model,
    make_distribution,
    type_law,
)

L = 10
center = make_distribution([0.5, 0.5])
models = {
    "iid":      IIDCodebook(base=center, word_length=L),
    "uniform":  UniformTypeCodebook(alphabet_size=2, word_length=L),
    "kappa=2":  TypeMixtureCodebook(center=center, concentration=2.0, word_length=L),
    "kappa=20": TypeMixtureCodebook(center=center, concentration=20.0, word_length=L),
}

print(f"exact type-class probabilities, binary words of length {L}")
print(f"{'type':>8}  " + "  ".join(f"{k:>9}" for k in models))
types, _ = type_law(models["iid"])
laws = {k: type_law(m)[1] for k, m in models.items()}
for i, t in enumerate(types):
    row = "  ".join(f"{laws[k][i]:9.5f}" for k in models)
    print(f"{tuple(t)!s:>8}  {row}")

print()
print("annealing narrows the mixture as generations pass:")
schedule = AnnealSchedule("geometric", base=1.0, rate=1.6)
model = models["kappa=2"]
for gen in (0, 2, 5, 10):
    annealed = anneal_model(model, schedule, gen)
    _, probs = type_law(annealed)
    print(f"  generation {gen:2d}: kappa = {annealed.concentration:8.2f}, "
          f"min type prob = {probs.min():.2e}")
