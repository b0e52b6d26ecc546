"""Interpolated absolute-discount n-gram language model with EOS termination.

Conditionals are over the V content tokens plus EOS, interpolating each
order with the next lower one down to the uniform base, so every token has
positive probability under every history and the sequence law sums to one.
Sampling is ancestral; the model doubles as the reference / noise / proposal
distribution for the energy-based sequence models.
"""

import numpy as np

from ..rng import derive_rng


class LengthCapExceeded(RuntimeError):
    """Ancestral sampling hit the maximum length before emitting EOS."""


class NgramAlm:
    def __init__(self, vocab_size, order=2, discount=0.75):
        if not 0.0 < discount < 1.0:
            raise ValueError("discount must lie in (0, 1)")
        if order < 1:
            raise ValueError("order must be >= 1")
        self.vocab_size = int(vocab_size)
        self.order = int(order)
        self.discount = float(discount)
        self.bos = self.vocab_size          # sentinel inside histories only
        self.eos = self.vocab_size + 1      # emitted symbol index V
        self.n_symbols = self.vocab_size + 1  # content tokens + EOS column
        # counts[k] maps history tuple (length k) -> count vector over symbols
        self.counts = [dict() for _ in range(self.order)]
        self._cache = {}
        self._version = 0

    # -- estimation -----------------------------------------------------------
    def fit(self, corpus, weights=None):
        for sent, w in zip(corpus, weights if weights is not None else [1.0] * len(corpus)):
            self.add_sentence(sent, w)
        return self

    def add_sentence(self, sentence, weight=1.0) -> None:
        self._invalidate()
        history = (self.bos,) * (self.order - 1)
        for token in tuple(sentence) + (self.vocab_size,):
            for k in range(self.order):
                h = history[len(history) - k:] if k else ()
                vec = self.counts[k].get(h)
                if vec is None:
                    vec = self.counts[k][h] = np.zeros(self.n_symbols)
                vec[token] += weight
            if token == self.vocab_size:
                break
            history = (history + (token,))[1:] if self.order > 1 else ()

    def decay_counts(self, factor) -> None:
        self._invalidate()
        for table in self.counts:
            for vec in table.values():
                vec *= factor

    def _invalidate(self):
        self._version += 1
        if self._cache:
            self._cache = {}

    # -- conditionals ----------------------------------------------------------
    def _clip_history(self, history):
        h = tuple(history)[-(self.order - 1):] if self.order > 1 else ()
        if self.order > 1 and len(h) < self.order - 1:
            h = (self.bos,) * (self.order - 1 - len(h)) + h
        return h

    def conditional(self, history) -> np.ndarray:
        """P(. | history) over the V content tokens and EOS (index V)."""
        h = self._clip_history(history)
        cached = self._cache.get(h)
        if cached is not None:
            return cached[0]
        probs = np.full(self.n_symbols, 1.0 / self.n_symbols)
        for k in range(self.order):
            hk = h[len(h) - k:] if k else ()
            vec = self.counts[k].get(hk)
            if vec is None:
                continue
            total = vec.sum()
            if total <= 0:
                continue
            n_distinct = float((vec > 0).sum())
            backoff_mass = self.discount * n_distinct / total
            probs = np.maximum(vec - self.discount, 0.0) / total + backoff_mass * probs
        self._cache[h] = (probs, np.cumsum(probs))
        return probs

    def conditional_cdf(self, history) -> np.ndarray:
        h = self._clip_history(history)
        if h not in self._cache:
            self.conditional(h)
        return self._cache[h][1]

    def log_conditional(self, history) -> np.ndarray:
        return np.log(self.conditional(history))

    def log_prob(self, sentence) -> float:
        total = 0.0
        history = ()
        for token in tuple(sentence) + (self.vocab_size,):
            total += float(np.log(self.conditional(history)[token]))
            history = history + (token,)
        return total

    def log_prob_batch(self, sentences) -> np.ndarray:
        return np.array([self.log_prob(tuple(int(v) for v in s)) for s in sentences])

    # -- sampling ---------------------------------------------------------------
    def sample(self, rng, max_len=200) -> tuple:
        out = []
        while True:
            cdf = self.conditional_cdf(tuple(out))
            token = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
            token = min(token, self.n_symbols - 1)
            if token == self.vocab_size:
                return tuple(out)
            out.append(token)
            if len(out) > max_len:
                raise LengthCapExceeded(f"no EOS within {max_len} tokens")

    def sample_n(self, rng, n, max_len=200) -> list:
        return [self.sample(rng, max_len=max_len) for _ in range(n)]

    # dynamic-noise interface: stochastic count-space MLE step
    def mle_step(self, batch, lr) -> None:
        lr = min(1.0, float(lr))
        if lr <= 0:
            return
        self.decay_counts(1.0 - lr)
        for sent in batch:
            self.add_sentence(tuple(int(v) for v in sent), weight=lr)

    # -- exact termination mass ---------------------------------------------------
    def total_mass_up_to(self, max_len) -> float:
        """Exact probability of emitting EOS within max_len tokens, by dynamic
        programming over the finite history automaton."""
        start = self._clip_history(())
        mass = {start: 1.0}
        terminated = 0.0
        for _ in range(max_len + 1):
            nxt = {}
            for h, m in mass.items():
                probs = self.conditional(h)
                terminated += m * probs[self.vocab_size]
                for w in range(self.vocab_size):
                    h2 = (h + (w,))[1:] if self.order > 1 else ()
                    nxt[h2] = nxt.get(h2, 0.0) + m * probs[w]
            mass = nxt
        return terminated


def fit_ngram(corpus, vocab_size, order=2, discount=0.75) -> NgramAlm:
    return NgramAlm(vocab_size, order=order, discount=discount).fit(corpus)
