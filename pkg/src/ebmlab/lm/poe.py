"""Product-of-experts sequence energies for controlled generation at toy scale.

The combined energy is a weighted sum of expert energies (lower = better);
as an EnergyModel the potential is its negation, so the MH-within-Gibbs
machinery samples the product distribution directly.
"""

import numpy as np

from ..oracle import EnergyModel


def poe_energy(experts, sentence) -> float:
    """sum_i alpha_i E_i(x) over (weight, scorer) pairs."""
    experts = list(experts)
    if not experts:
        raise ValueError("need at least one expert")
    return float(sum(alpha * scorer(tuple(sentence)) for alpha, scorer in experts))


class AlmNegLogLik:
    """Fluency expert: negative reference log-likelihood."""

    def __init__(self, alm):
        self.alm = alm

    def __call__(self, x) -> float:
        return -self.alm.log_prob(x)


class KeywordMissingPenalty:
    """Constraint expert: flat penalty whenever no keyword appears."""

    def __init__(self, keywords, penalty=5.0):
        self.keywords = set(int(k) for k in keywords)
        self.penalty = float(penalty)

    def __call__(self, x) -> float:
        return 0.0 if any(t in self.keywords for t in x) else self.penalty


class HammingDistance:
    """Faithfulness expert: token-level distance to a source sentence."""

    def __init__(self, source):
        self.source = tuple(source)

    def __call__(self, x) -> float:
        if len(x) != len(self.source):
            raise ValueError("hamming distance needs equal lengths")
        return float(sum(a != b for a, b in zip(x, self.source)))


class PoeSequenceModel(EnergyModel):
    """Fixed-length product-of-experts target for coordinate-wise samplers."""

    def __init__(self, experts, length, vocab_size):
        self.experts = list(experts)
        if not self.experts:
            raise ValueError("need at least one expert")
        self.length = int(length)
        self.vocab_size = int(vocab_size)
        self.n_coords = self.length

    def energy(self, x) -> float:
        return poe_energy(self.experts, x)

    def potential(self, x) -> float:
        return -self.energy(x)

    def potential_batch(self, xs) -> np.ndarray:
        return np.array([self.potential(tuple(int(v) for v in row)) for row in xs])
