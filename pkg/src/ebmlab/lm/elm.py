"""Sentence-level energy models: globally-normalized, per-length normalized
(trans-dimensional), and their training by dynamic noise-contrastive
estimation with per-length normalizer parameters.
"""

import numpy as np

from ..learners import NceConfig, dnce_train
from ..nets import DenseNet
from ..oracle import DiscreteSpace, EnergyModel, StreamingLogSumExp, enumerate_log_z
from ..rng import derive_rng
from .features import NgramFeatureSet


class SentenceLogLinear(EnergyModel):
    """U(x) = weights . feature-counts(x) over a fitted feature set.

    Feature vectors are memoized per sentence (extraction is pure), so
    repeated scoring of desk-scale corpora is table lookups.
    """

    def __init__(self, featureset: NgramFeatureSet, weights=None):
        self.featureset = featureset
        self.weights = (np.zeros(featureset.dim) if weights is None
                        else np.array(weights, dtype=np.float64))
        self._feat_cache = {}

    def _features(self, x) -> np.ndarray:
        x = tuple(int(v) for v in x)
        feats = self._feat_cache.get(x)
        if feats is None:
            feats = self._feat_cache[x] = self.featureset.extract_dense(x)
        return feats

    def potential(self, x) -> float:
        return float(self._features(x) @ self.weights)

    def potential_batch(self, xs) -> np.ndarray:
        return np.stack([self._features(row) for row in xs]) @ self.weights \
            if len(xs) else np.zeros(0)

    def grad_params(self, x) -> np.ndarray:
        return self._features(x).copy()

    def grad_params_batch(self, xs) -> np.ndarray:
        return np.stack([self._features(row) for row in xs])

    def get_flat_params(self) -> np.ndarray:
        return self.weights.copy()

    def set_flat_params(self, values) -> None:
        self.weights = np.asarray(values, dtype=np.float64).copy()


class NeuralSequencePotential(EnergyModel):
    """Position-summed bigram-window potential: each adjacent embedding pair
    (BOS-padded on the left) feeds a small dense net whose scalar outputs sum
    over positions.  Length-free by construction."""

    def __init__(self, vocab_size, embed_dim=4, hidden=8, seed=0):
        self.vocab_size = int(vocab_size)
        self.embed_dim = int(embed_dim)
        rng = derive_rng(seed, "seqpot")
        # +1 embedding row for the left-boundary symbol
        self.embeddings = rng.uniform(-0.1, 0.1, size=(vocab_size + 1, embed_dim))
        self.net = DenseNet([2 * embed_dim, hidden, 1], rng=rng)

    def _windows(self, x):
        padded = (self.vocab_size,) + tuple(int(v) for v in x)
        left = self.embeddings[list(padded[:-1])]
        right = self.embeddings[list(padded[1:])]
        return np.concatenate([left, right], axis=1), padded

    def potential(self, x) -> float:
        if len(x) == 0:
            return 0.0
        windows, _ = self._windows(x)
        return float(self.net.output(windows).sum())

    def potential_batch(self, xs) -> np.ndarray:
        return np.array([self.potential(row) for row in xs])

    def grad_params(self, x) -> np.ndarray:
        grads = np.zeros(self.n_params)
        if len(x) == 0:
            return grads
        windows, padded = self._windows(x)
        cache = self.net.forward(windows)
        net_grads, input_grads = self.net.backward(cache, np.ones((len(windows), 1)))
        emb_grad = np.zeros_like(self.embeddings)
        d = self.embed_dim
        for t in range(len(windows)):
            emb_grad[padded[t]] += input_grads[t, :d]
            emb_grad[padded[t + 1]] += input_grads[t, d:]
        return np.concatenate([emb_grad.ravel(), net_grads.flat()])

    def grad_params_batch(self, xs) -> np.ndarray:
        return np.stack([self.grad_params(row) for row in xs])

    def get_flat_params(self) -> np.ndarray:
        return np.concatenate([self.embeddings.ravel(), self.net.get_flat_params()])

    def set_flat_params(self, values) -> None:
        values = np.asarray(values, dtype=np.float64)
        k = self.embeddings.size
        self.embeddings = values[:k].reshape(self.embeddings.shape).copy()
        self.net.set_flat_params(values[k:])


class SumPotential(EnergyModel):
    """Sum of component potentials sharing one concatenated parameter vector."""

    def __init__(self, parts):
        self.parts = list(parts)

    def potential(self, x) -> float:
        return sum(p.potential(x) for p in self.parts)

    def potential_batch(self, xs) -> np.ndarray:
        xs = [tuple(int(v) for v in row) for row in xs]
        total = np.zeros(len(xs))
        for p in self.parts:
            total += p.potential_batch(xs)
        return total

    def grad_params(self, x) -> np.ndarray:
        return np.concatenate([p.grad_params(x) for p in self.parts])

    def grad_params_batch(self, xs) -> np.ndarray:
        xs = [tuple(int(v) for v in row) for row in xs]
        return np.concatenate([p.grad_params_batch(xs) for p in self.parts], axis=1)

    def get_flat_params(self) -> np.ndarray:
        return np.concatenate([p.get_flat_params() for p in self.parts])

    def set_flat_params(self, values) -> None:
        values = np.asarray(values, dtype=np.float64)
        offset = 0
        for p in self.parts:
            size = p.get_flat_params().size
            p.set_flat_params(values[offset:offset + size])
            offset += size


# ---------------------------------------------------------------------------
# trans-dimensional model with per-length normalization
# ---------------------------------------------------------------------------

class TrfModel:
    """Mixture of per-length random fields: p(l, x^l) = pi_l exp(U(x^l) - zeta_l).

    The potential excludes the EOS symbol (lengths are carried by pi), in
    contrast to the globally-normalized variant which appends EOS to x.
    """

    def __init__(self, vocab_size, max_len, potential: EnergyModel, pi=None,
                 zetas=None):
        self.vocab_size = int(vocab_size)
        self.max_len = int(max_len)
        self.potential = potential
        self.pi = (np.full(max_len, 1.0 / max_len) if pi is None
                   else np.asarray(pi, dtype=np.float64))
        if self.pi.size != max_len or abs(self.pi.sum() - 1.0) > 1e-9:
            raise ValueError("pi must be a distribution over lengths 1..max_len")
        self.zetas = (np.zeros(max_len) if zetas is None
                      else np.asarray(zetas, dtype=np.float64))

    @classmethod
    def with_empirical_lengths(cls, vocab_size, max_len, potential, corpus):
        counts = np.ones(max_len)  # add-one smoothing over [1, L]
        for sent in corpus:
            if not 1 <= len(sent) <= max_len:
                raise ValueError(f"corpus sentence length {len(sent)} outside [1, {max_len}]")
            counts[len(sent) - 1] += 1.0
        return cls(vocab_size, max_len, potential, pi=counts / counts.sum())

    def length_space(self, l) -> DiscreteSpace:
        return DiscreteSpace.sequences(self.vocab_size, max_len=l, min_len=l)

    def log_prob(self, x) -> float:
        l = len(x)
        if not 1 <= l <= self.max_len:
            raise ValueError(f"length {l} outside [1, {self.max_len}]")
        return (float(np.log(self.pi[l - 1])) + self.potential.potential(x)
                - float(self.zetas[l - 1]))

    def enumerate_zetas(self) -> np.ndarray:
        """Exact per-length log normalizers of the potential."""
        return np.array([enumerate_log_z(self.potential, self.length_space(l))
                         for l in range(1, self.max_len + 1)])

    def set_enumerated_zetas(self) -> "TrfModel":
        self.zetas = self.enumerate_zetas()
        return self

    def total_mass(self) -> float:
        """sum_l sum_{x^l} p(l, x^l); equals 1 with exact zetas."""
        total = 0.0
        for l in range(1, self.max_len + 1):
            lse = StreamingLogSumExp()
            for batch in self.length_space(l).batches():
                lse.add(self.potential.potential_batch(batch))
            total += self.pi[l - 1] * np.exp(lse.value() - self.zetas[l - 1])
        return total


class GlobalDimensionElm(EnergyModel):
    """Globally-normalized model with explicit dimension features:
    p(j, x^j) proportional to exp(nu_j + U(x^j))."""

    def __init__(self, potential: EnergyModel, nu):
        self.base = potential
        self.nu = np.asarray(nu, dtype=np.float64)

    def potential(self, x) -> float:
        return float(self.nu[len(x) - 1]) + self.base.potential(x)

    def potential_batch(self, xs) -> np.ndarray:
        xs = list(xs)
        if len(xs) == 0:
            return np.zeros(0)
        lengths = np.array([len(row) for row in xs])
        return self.nu[lengths - 1] + self.base.potential_batch(xs)


def gn_elm_matched_to_trf(trf: TrfModel) -> GlobalDimensionElm:
    """Dimension-feature weights that reproduce a TRF inside the
    globally-normalized parameterization: nu_j = log pi_j - zeta_j makes the
    implied mixture weights e^{nu_j} Z_j / Z equal pi_j."""
    zetas = trf.enumerate_zetas()
    return GlobalDimensionElm(trf.potential, np.log(trf.pi) - zetas)


def gn_elm_implied_length_mixture(potential: EnergyModel, vocab_size, max_len):
    """Mixture weights Z_j / Z implied by a plain globally-normalized model."""
    z = np.array([enumerate_log_z(potential,
                                  DiscreteSpace.sequences(vocab_size, max_len=l, min_len=l))
                  for l in range(1, max_len + 1)])
    w = np.exp(z - z.max())
    return w / w.sum()


# ---------------------------------------------------------------------------
# DNCE training with length-aware normalizers
# ---------------------------------------------------------------------------

class TruncatedLengthNoise:
    """Length-aware noise: an EOS-terminating reference restricted to sentence
    lengths in [1, max_len], renormalized exactly by the truncated mass.

    The interpolated positive class of DNCE must lie inside the model's
    support, so noise samples outside the length range are rejected and the
    density is scaled by the exact in-range probability (computed by dynamic
    programming over the reference's history automaton).
    """

    _TABLE_LIMIT = 4096

    def __init__(self, alm, max_len):
        self.alm = alm
        self.max_len = int(max_len)
        self._log_mass = None
        self._version = None
        self._space = DiscreteSpace.sequences(alm.vocab_size, max_len=max_len)
        self._states = (list(self._space.states())
                        if self._space.size <= self._TABLE_LIMIT else None)
        self._table = None

    def _log_in_range_mass(self) -> float:
        self._refresh()
        return self._log_mass

    def _refresh(self) -> None:
        if self._version == self.alm._version:
            return
        in_range = (self.alm.total_mass_up_to(self.max_len)
                    - float(self.alm.conditional(())[self.alm.vocab_size]))
        self._log_mass = float(np.log(in_range))
        if self._states is not None:
            logq = np.array([self.alm.log_prob(x) for x in self._states])
            self._table = logq - self._log_mass
            self._cdf = np.cumsum(np.exp(self._table))
        self._version = self.alm._version

    def sample_n(self, rng, n) -> list:
        self._refresh()
        if self._states is not None:
            picks = np.searchsorted(self._cdf, rng.random(n) * self._cdf[-1],
                                    side="right")
            return [self._states[min(int(i), len(self._states) - 1)] for i in picks]
        out = []
        while len(out) < n:
            x = self.alm.sample(rng, max_len=10 * self.max_len + 50)
            if 1 <= len(x) <= self.max_len:
                out.append(x)
        return out

    def log_prob_batch(self, xs) -> np.ndarray:
        self._refresh()
        if self._states is not None:
            idx = [self._space.index_of(tuple(int(v) for v in x)) for x in xs]
            return self._table[idx]
        return self.alm.log_prob_batch(xs) - self._log_mass

    def mle_step(self, batch, lr) -> None:
        self.alm.mle_step(batch, lr)

class _TrfDnceView(EnergyModel):
    """Adapter giving the DNCE learner log pi_l + U(x^l) as the unnormalized
    score; the learner's zeta block then realizes the per-length normalizers."""

    def __init__(self, trf: TrfModel):
        self.trf = trf

    def potential_batch(self, xs) -> np.ndarray:
        xs = [tuple(int(v) for v in row) for row in xs]
        lengths = np.array([len(row) for row in xs])
        return np.log(self.trf.pi[lengths - 1]) + self.trf.potential.potential_batch(xs)

    def potential(self, x) -> float:
        return float(np.log(self.trf.pi[len(x) - 1])) + self.trf.potential.potential(x)

    def grad_params_batch(self, xs) -> np.ndarray:
        return self.trf.potential.grad_params_batch(
            [tuple(int(v) for v in row) for row in xs])

    def get_flat_params(self) -> np.ndarray:
        return self.trf.potential.get_flat_params()

    def set_flat_params(self, values) -> None:
        self.trf.potential.set_flat_params(values)


def train_trf_dnce(trf: TrfModel, corpus, noise, schedule, steps, seed,
                   nu=4, alpha=0.5, batch_size=64, noise_lr_scale=1.0,
                   noise_update_every=1, trace_every=0):
    """Fit (theta, zeta_1..zeta_L) by dynamic NCE against a length-aware noise
    model (its samples carry their lengths); the noise model itself takes
    MLE steps on the data batches."""
    if steps == 0:
        return trf
    view = _TrfDnceView(trf)
    if not isinstance(noise, TruncatedLengthNoise):
        noise = TruncatedLengthNoise(noise, trf.max_len)

    def zeta_index(xs):
        return np.array([len(row) - 1 for row in xs])

    cfg = NceConfig(nu=nu, batch_size=batch_size, zeta_init=0.0)
    result = dnce_train(view, list(corpus), noise, cfg, schedule, steps, seed,
                        alpha=alpha, zeta_dim=trf.max_len, zeta_index=zeta_index,
                        noise_lr_scale=noise_lr_scale,
                        noise_update_every=noise_update_every,
                        trace_every=trace_every)
    trf.zetas = result.zeta.copy()
    return trf
